"""Reproducible command-line driver.

Subcommands: gen, train, eval, sample, bifurcation. Every run is driven
by one JSON config; its sha256 hash is embedded in all outputs so
artifacts from the same run can be tied together. Exit codes: 0 success,
1 usage or config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import datasets, experiments, metrics
from .flow import SamplerConfig, write_loss_csv
from .models import SYSTEM_IDS

OUTPUT_ROOT_ENV = "BIFURCFLOW_OUT"


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "system_id": str,
    "seed": int,
    "dataset": {
        "n_train": int,
        "n_test": int,
        "options": dict,
    },
    "arch": dict,
    "training": {
        "epochs": int,
        "batch_size": int,
        "lr": float,
        "matched": bool,
    },
    "sampler": {
        "num_steps": int,
        "integrator": str,
    },
    "eval": {
        "n_pred": int,
        "split": str,
        "max_records": int,
    },
    "bifurcation": {
        "mu_values": list,
        "epsilon": float,
        "n_samples_per_mu": int,
        "ground_truth": bool,
    },
    "outdir": str,
}


def _check_schema(cfg, schema, path=""):
    for key, val in cfg.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key {here!r}")
        want = schema[key]
        if isinstance(want, dict) and want:
            if not isinstance(val, dict):
                raise ConfigError(f"{here} must be an object")
            _check_schema(val, want, here)
        elif want is float:
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigError(f"{here} must be a number")
        elif want is int:
            if not isinstance(val, int) or isinstance(val, bool):
                raise ConfigError(f"{here} must be an integer")
        elif not isinstance(val, want):
            raise ConfigError(f"{here} must be {want.__name__}")


def load_config(path, overrides=()):
    try:
        with open(path) as f:
            cfg = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override {ov!r} is not KEY=VALUE")
        key, raw = ov.split("=", 1)
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = val
    _check_schema(cfg, _SCHEMA)
    if "system_id" not in cfg:
        raise ConfigError("config must set system_id")
    if cfg["system_id"] not in SYSTEM_IDS:
        raise ConfigError(f"unknown system {cfg['system_id']!r}")
    return cfg


def config_hash(cfg) -> str:
    blob = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _outdir(cfg, args):
    out = getattr(args, "outdir", None) or cfg.get("outdir") \
        or os.environ.get(OUTPUT_ROOT_ENV) or "runs"
    path = os.path.join(out, cfg["system_id"])
    os.makedirs(path, exist_ok=True)
    return path


def _dataset_dir(cfg, args):
    return os.path.join(_outdir(cfg, args), "dataset")


def _load_or_error(cfg, args):
    path = _dataset_dir(cfg, args)
    try:
        return datasets.load_dataset(path)
    except FileNotFoundError:
        raise FileNotFoundError(
            f"dataset missing; expected it at {path} (run `gen` first)")


def _write_json(path, doc):
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen(cfg, args):
    dcfg = cfg.get("dataset", {})
    ds = datasets.generate(cfg["system_id"], seed=cfg.get("seed", 0),
                           n_train=dcfg.get("n_train"),
                           n_test=dcfg.get("n_test"),
                           **dcfg.get("options", {}))
    outdir = _dataset_dir(cfg, args)
    meta_path = os.path.join(outdir, "meta.json")
    if os.path.exists(meta_path) and not args.overwrite:
        # idempotence check: same seed must reproduce the same bytes
        old = json.load(open(meta_path))
        tmp = outdir + ".tmp"
        datasets.save_dataset(ds, tmp, overwrite=True)
        new = json.load(open(os.path.join(tmp, "meta.json")))
        for f in os.listdir(tmp):
            os.remove(os.path.join(tmp, f))
        os.rmdir(tmp)
        if new["checksum_sha256"] != old["checksum_sha256"]:
            raise FileExistsError(
                f"{outdir} holds a different dataset; use --overwrite")
        print(f"gen: {outdir} already up to date "
              f"(checksum {old['checksum_sha256'][:12]})")
        return
    datasets.save_dataset(ds, outdir, overwrite=True)
    doc = json.load(open(meta_path))
    doc["config_hash"] = config_hash(cfg)
    _write_json(meta_path, doc)
    print(f"gen: wrote {len(ds)} records to {outdir}")


def cmd_train(cfg, args):
    ds = _load_or_error(cfg, args)
    tcfg = cfg.get("training", {})
    matched = bool(tcfg.get("matched", True))
    seed = cfg.get("seed", 0)
    model, history = experiments.train_flow_model(
        ds, seed=seed, matched=matched, epochs=tcfg.get("epochs"),
        batch_size=tcfg.get("batch_size"), lr=tcfg.get("lr"),
        arch=cfg.get("arch") or None)
    outdir = _outdir(cfg, args)
    tag = "matched" if matched else "unmatched"
    ckpt = os.path.join(outdir, f"model_{tag}.json")
    experiments.save_model(ckpt, model, cfg["system_id"], seed, matched,
                           arch=cfg.get("arch"),
                           extra={"config_hash": config_hash(cfg),
                                  "epochs": len(history)})
    write_loss_csv(os.path.join(outdir, f"loss_{tag}.csv"), history)
    final = history[-1][1] if history else float("nan")
    print(f"train: {len(history)} epochs, final loss {final:.6g}, "
          f"checkpoint {ckpt}")


def _checkpoint_path(cfg, args):
    if args.checkpoint:
        return args.checkpoint
    tag = "matched" if cfg.get("training", {}).get("matched", True) \
        else "unmatched"
    return os.path.join(_outdir(cfg, args), f"model_{tag}.json")


def _sampler(cfg):
    scfg = cfg.get("sampler", {})
    return SamplerConfig(num_steps=scfg.get("num_steps", 100),
                         integrator=scfg.get("integrator", "euler"))


def cmd_eval(cfg, args):
    ds = _load_or_error(cfg, args)
    ckpt = _checkpoint_path(cfg, args)
    if not os.path.exists(ckpt):
        raise FileNotFoundError(f"checkpoint not found: {ckpt}")
    model, _ = experiments.load_model(ckpt)
    ecfg = cfg.get("eval", {})
    report = metrics.evaluate_system(
        model, ds, split=ecfg.get("split", "test"),
        n_pred=ecfg.get("n_pred", 100), sampler=_sampler(cfg),
        seed=cfg.get("seed", 0), max_records=ecfg.get("max_records"))
    report["config_hash"] = config_hash(cfg)
    report["checkpoint"] = ckpt
    outdir = _outdir(cfg, args)
    _write_json(os.path.join(outdir, "report.json"), report)
    with open(os.path.join(outdir, "report.csv"), "w") as f:
        f.write("system,metric,record,value\n")
        for rec, val in zip(report["records"], report["per_record"]):
            f.write(f"{report['system']},{report['metric']},{rec},"
                    f"{val:.10g}\n")
        f.write(f"{report['system']},{report['metric']},mean,"
                f"{report['mean']:.10g}\n")
    print(f"eval: {report['system']} {report['metric']} "
          f"mean {report['mean']:.6g} over {len(report['records'])} records")


def cmd_sample(cfg, args):
    ds = _load_or_error(cfg, args)
    ckpt = _checkpoint_path(cfg, args)
    if not os.path.exists(ckpt):
        raise FileNotFoundError(f"checkpoint not found: {ckpt}")
    model, _ = experiments.load_model(ckpt)
    ecfg = cfg.get("eval", {})
    idx = ds.indices(ecfg.get("split", "test"))
    if ecfg.get("max_records") is not None:
        idx = idx[:ecfg["max_records"]]
    preds = metrics.predictions_for_records(
        model, ds, idx, n_pred=ecfg.get("n_pred", 100),
        sampler=_sampler(cfg), seed=cfg.get("seed", 0))
    outdir = _outdir(cfg, args)
    path = os.path.join(outdir, "samples.npz")
    np.savez(path, records=np.asarray(idx), samples=preds,
             config_hash=config_hash(cfg))
    print(f"sample: wrote {preds.shape} samples to {path}")


def cmd_bifurcation(cfg, args):
    bcfg = cfg.get("bifurcation", {})
    mu_values = bcfg.get("mu_values", [])
    epsilon = bcfg.get("epsilon", 0.1)
    n_per = bcfg.get("n_samples_per_mu", 50)
    if bcfg.get("ground_truth", False) or args.ground_truth:
        scan = metrics.bifurcation_scan_solver(
            mu_values, epsilon=epsilon, n_samples_per_mu=n_per,
            seed=cfg.get("seed", 0))
    else:
        ckpt = _checkpoint_path(cfg, args)
        if not os.path.exists(ckpt):
            raise FileNotFoundError(f"checkpoint not found: {ckpt}")
        model, meta = experiments.load_model(ckpt)
        if meta.get("system_id") != "allen_cahn":
            raise ValueError("bifurcation scan needs an allen_cahn model")
        arch = dict(meta.get("arch") or {})
        t_dim = arch.get("t_dim", 11)
        nx = arch.get("x_dim", 200)
        scan = metrics.bifurcation_scan(
            model, mu_values, epsilon=epsilon, n_samples_per_mu=n_per,
            t_dim=t_dim, nx=nx, sampler=_sampler(cfg),
            seed=cfg.get("seed", 0))
    outdir = _outdir(cfg, args)
    path = os.path.join(outdir, "bifurcation.csv")
    metrics.write_bifurcation_csv(path, scan)
    print(f"bifurcation: wrote {sum(len(s) for _, s in scan)} rows to {path}")


# ---------------------------------------------------------------------------

def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="bifurcflow",
        description="Flow matching for multistable bifurcation systems.")
    parser.add_argument("--config", "-c", required=True,
                        help="path to a JSON run config")
    parser.add_argument("--set", action="append", default=[], metavar="K=V",
                        help="override a config field (dotted keys)")
    parser.add_argument("--outdir", default=None,
                        help=f"output root (default: config outdir, then "
                             f"${OUTPUT_ROOT_ENV}, then ./runs)")
    sub = parser.add_subparsers(dest="command", required=True)
    p_gen = sub.add_parser("gen", help="generate and store a dataset")
    p_gen.add_argument("--overwrite", action="store_true")
    sub.add_parser("train", help="train a flow model")
    for name in ("eval", "sample"):
        p = sub.add_parser(name)
        p.add_argument("--checkpoint", default=None)
    p_bif = sub.add_parser("bifurcation", help="mu sweep statistics")
    p_bif.add_argument("--checkpoint", default=None)
    p_bif.add_argument("--ground-truth", action="store_true",
                       help="use the PDE solver instead of a model")

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    handlers = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval,
                "sample": cmd_sample, "bifurcation": cmd_bifurcation}
    try:
        handlers[args.command](cfg, args)
    except (FileNotFoundError, FileExistsError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Learning-task views of the six systems plus dataset file I/O.

A Dataset holds raw inputs (for metrics, in original units), the model
conditioning vectors, flattened targets, a prior spec, a matching-group
descriptor, and a fixed train/test split. On disk it is one metadata JSON
plus one .npz of flat arrays, with a sha256 checksum binding them.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import systems
from .flow import TrainingSet
from .priors import PriorSpec
from .symmetry import GroupAction, SymmetryGroup, best_circular_shift_fft

SYSTEM_IDS = ("two_deltas", "coin_flip", "three_roads", "four_node",
              "beam", "allen_cahn")

DEFAULT_SIZES = {
    "two_deltas": (1000, 100),
    "coin_flip": (800, 200),
    "three_roads": (1600, 400),
    "four_node": (1400, 600),
    "beam": (700, 300),
    "allen_cahn": (300, 100),
}

RANDOM_WALK_SIGMA = 0.05


@dataclass
class Dataset:
    system_id: str
    raw_inputs: np.ndarray    # (N, Di), original units
    cond: np.ndarray          # (N, Dc), what the model conditions on
    targets: np.ndarray       # (N, D), original units
    prior: PriorSpec
    matching: dict            # group descriptor, e.g. {"kind": "sign_flip"}
    train_idx: np.ndarray
    test_idx: np.ndarray
    meta: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return self.targets.shape[0]

    def indices(self, split):
        if split == "train":
            return self.train_idx
        if split == "test":
            return self.test_idx
        if split == "all":
            return np.arange(len(self))
        raise ValueError(f"unknown split {split!r}")

    def training_set(self, split="train") -> TrainingSet:
        idx = self.indices(split)
        center = self.cond[idx] if self.prior.kind == "conditional_gaussian" \
            else None
        return TrainingSet(self.targets[idx], self.cond[idx],
                           prior_center=center)

    # -- matching ------------------------------------------------------------

    def matcher(self):
        """Vectorized matcher (X0, X1, C) -> X1', or None when trivial."""
        kind = self.matching["kind"]
        if kind == "trivial":
            return None
        if kind == "sign_flip":
            def match(X0, X1, C):
                flip = np.sum((X0 + X1) ** 2, axis=1) < \
                    np.sum((X0 - X1) ** 2, axis=1)
                out = X1.copy()
                out[flip] = -out[flip]
                return out
            return match
        if kind == "solution_swap":
            def match(X0, X1, C):
                alt = 2.0 * C - X1
                swap = np.sum((X0 - alt) ** 2, axis=1) < \
                    np.sum((X0 - X1) ** 2, axis=1)
                out = X1.copy()
                out[swap] = alt[swap]
                return out
            return match
        if kind == "cyclic_shift":
            n = self.matching["axis_len"]

            def match(X0, X1, C):
                out = np.empty_like(X1)
                for i in range(X0.shape[0]):
                    k = best_circular_shift_fft(X0[i].reshape(-1, n),
                                                X1[i].reshape(-1, n))
                    out[i] = GroupAction("circular_shift", shift=k,
                                         axis_len=n).apply(X1[i])
                return out
            return match
        raise ValueError(f"unknown matching kind {kind!r}")

    def record_group(self, i) -> SymmetryGroup:
        """The matching group of record i as explicit actions."""
        kind = self.matching["kind"]
        if kind == "trivial":
            return SymmetryGroup.trivial()
        if kind == "sign_flip":
            return SymmetryGroup.coin_flip()
        if kind == "solution_swap":
            return SymmetryGroup.solution_swap(self.cond[i])
        if kind == "cyclic_shift":
            return SymmetryGroup.cyclic_shifts(self.matching["axis_len"])
        raise ValueError(f"unknown matching kind {kind!r}")

    # -- priors / sampling glue ----------------------------------------------

    def x0_transform(self):
        """Post-draw hook applied to prior samples (beam padding mask)."""
        if self.system_id != "beam":
            return None
        n_pad = self.meta["n_pad"]
        t_dim = self.meta["t_dim"]
        mask_slice = slice(3 * n_pad, 4 * n_pad)

        def transform(X0, C):
            return X0 * np.tile(C[:, mask_slice], (1, t_dim))
        return transform

    # -- metrics support -------------------------------------------------------

    def allowed_outcomes(self, i):
        """(atoms, weights) of the exact outcome distribution of record i,
        or None for systems scored by residual."""
        if self.system_id == "two_deltas":
            return np.array([[-1.0], [1.0]]), np.array([0.5, 0.5])
        if self.system_id == "coin_flip":
            x = self.raw_inputs[i, 0]
            return np.array([[x], [-x]]), np.array([0.5, 0.5])
        if self.system_id == "three_roads":
            x1, x2 = self.raw_inputs[i]
            d = x2 - x1
            atoms = np.array([
                [x1 - d / 2, x2 + d / 2],
                [x1 - d / 2, x2 - d / 2],
                [x1 + d / 2, x2 + d / 2],
            ])
            return atoms, np.full(3, 1.0 / 3.0)
        if self.system_id == "four_node":
            c = self.raw_inputs[i]
            return np.stack([c + systems.toys.FOUR_NODE_PATTERNS[0],
                             c + systems.toys.FOUR_NODE_PATTERNS[1]]), \
                np.array([0.5, 0.5])
        if self.system_id == "beam":
            y = self.targets[i]
            return np.stack([y, -y]), np.array([0.5, 0.5])
        return None


# ---------------------------------------------------------------------------
# generation

def generate(system_id, seed, n_train=None, n_test=None, **options) -> Dataset:
    if system_id not in SYSTEM_IDS:
        raise ValueError(f"unknown system {system_id!r}")
    d_train, d_test = DEFAULT_SIZES[system_id]
    n_train = d_train if n_train is None else int(n_train)
    n_test = d_test if n_test is None else int(n_test)
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    builder = {
        "two_deltas": _build_two_deltas,
        "coin_flip": _build_coin_flip,
        "three_roads": _build_three_roads,
        "four_node": _build_four_node,
        "beam": _build_beam,
        "allen_cahn": _build_allen_cahn,
    }[system_id]
    ds = builder(n, rng, options)
    ds.train_idx = np.arange(n_train)
    ds.test_idx = np.arange(n_train, n)
    ds.meta.update({"seed": int(seed), "n_train": n_train, "n_test": n_test,
                    "options": {k: v for k, v in options.items()}})
    return ds


def _records_to_dataset(system_id, records, prior, matching, meta=None):
    raw = np.stack([r.input for r in records])
    tgt = np.stack([r.output for r in records])
    return Dataset(system_id, raw, raw.copy(), tgt, prior, matching,
                   np.arange(0), np.arange(0), meta=meta or {})


def _build_two_deltas(n, rng, options):
    recs = systems.gen_two_deltas_records(n, rng)
    return _records_to_dataset(
        "two_deltas", recs, PriorSpec("gaussian", 1.0, (1,)),
        {"kind": "trivial"})


def _build_coin_flip(n, rng, options):
    recs = systems.gen_coin_flip(n, rng)
    return _records_to_dataset(
        "coin_flip", recs, PriorSpec("gaussian", 1.0, (1,)),
        {"kind": "sign_flip"})


def _build_three_roads(n, rng, options):
    recs = systems.gen_three_roads(n, rng)
    return _records_to_dataset(
        "three_roads", recs, PriorSpec("gaussian", 1.0, (2,)),
        {"kind": "trivial"})


def _build_four_node(n, rng, options):
    recs = systems.gen_four_node(n, rng)
    return _records_to_dataset(
        "four_node", recs, PriorSpec("conditional_gaussian", 1.0, (4,)),
        {"kind": "solution_swap"})


def _build_beam(n, rng, options):
    n_steps = int(options.get("n_steps", 200))
    t_dim = int(options.get("t_dim", 20))
    n_pad = int(options.get("n_pad", 11))
    step_sigma = float(options.get("step_sigma", RANDOM_WALK_SIGMA))
    tidx = np.round(np.linspace(0, n_steps - 1, t_dim)).astype(int)
    raw, cond, targets, masks, ns = [], [], [], [], []
    for _ in range(n):
        spec = systems.sample_beam_spec(rng)
        traj = systems.solve_beam_trajectory(spec, rng, n_steps=n_steps)
        mask = np.zeros(n_pad)
        mask[:spec.n] = 1.0
        pad = lambda a: np.concatenate([a, np.zeros(n_pad - spec.n)])
        cond.append(np.concatenate([pad(spec.L), pad(spec.C), pad(spec.K),
                                    mask, [spec.total_length / 10.0]]))
        x = np.zeros((t_dim, n_pad))
        x[:, :spec.n] = traj.positions[tidx, 1:, 0]  # node 0 is clamped
        targets.append(x.reshape(-1))
        raw.append(np.concatenate([[spec.n], pad(spec.L), pad(spec.C),
                                   pad(spec.K)]))
        masks.append(mask)
        ns.append(spec.n)
    ds = Dataset("beam", np.stack(raw), np.stack(cond), np.stack(targets),
                 PriorSpec("random_walk", step_sigma, (t_dim, n_pad)),
                 {"kind": "sign_flip"}, np.arange(0), np.arange(0),
                 meta={"t_dim": t_dim, "n_pad": n_pad, "n_steps": n_steps,
                       "time_indices": tidx.tolist()},
                 extra={"mask": np.stack(masks),
                        "n_segments": np.array(ns, dtype=float)})
    return ds


def _build_allen_cahn(n, rng, options):
    save_stride = int(options.get("save_stride", 100))
    step_sigma = float(options.get("step_sigma", RANDOM_WALK_SIGMA))
    overrides = {"save_stride": save_stride}
    for key in ("epsilon", "mu"):
        if options.get(key) is not None:
            overrides[key] = float(options[key])
    trajs = systems.gen_ac_dataset(n, rng, **overrides)
    t_dim = trajs[0].u.shape[0]
    nx = trajs[0].config.nx
    raw = np.array([[tr.config.mu, tr.config.epsilon] for tr in trajs])
    cond = np.column_stack([raw[:, 0], np.log(raw[:, 1])])
    targets = np.stack([tr.u.reshape(-1) for tr in trajs])
    return Dataset("allen_cahn", raw, cond, targets,
                   PriorSpec("random_walk", step_sigma, (t_dim, nx)),
                   {"kind": "cyclic_shift", "axis_len": nx},
                   np.arange(0), np.arange(0),
                   meta={"t_dim": t_dim, "nx": nx,
                         "save_stride": save_stride,
                         "dt": trajs[0].config.dt,
                         "t_end": trajs[0].config.t_end})


# ---------------------------------------------------------------------------
# file I/O

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_dataset(ds: Dataset, outdir, overwrite=False):
    os.makedirs(outdir, exist_ok=True)
    meta_path = os.path.join(outdir, "meta.json")
    data_path = os.path.join(outdir, "data.npz")
    if os.path.exists(meta_path) and not overwrite:
        raise FileExistsError(f"{meta_path} exists; pass overwrite to replace")
    arrays = {
        "raw_inputs": ds.raw_inputs,
        "cond": ds.cond,
        "targets": ds.targets,
        "train_idx": ds.train_idx,
        "test_idx": ds.test_idx,
    }
    for k, v in ds.extra.items():
        arrays[f"extra__{k}"] = v
    np.savez(data_path, **arrays)
    doc = {
        "system_id": ds.system_id,
        "prior": ds.prior.to_dict(),
        "matching": ds.matching,
        "meta": ds.meta,
        "checksum_sha256": _sha256(data_path),
    }
    with open(meta_path, "w") as f:
        json.dump(doc, f, indent=1)
    return data_path, meta_path


def load_dataset(path) -> Dataset:
    meta_path = os.path.join(path, "meta.json")
    data_path = os.path.join(path, "data.npz")
    if not os.path.exists(meta_path):
        raise FileNotFoundError(f"no dataset at {path} (missing meta.json)")
    with open(meta_path) as f:
        doc = json.load(f)
    if _sha256(data_path) != doc["checksum_sha256"]:
        raise ValueError(f"checksum mismatch for {data_path}")
    with np.load(data_path) as z:
        extra = {k[len("extra__"):]: z[k] for k in z.files
                 if k.startswith("extra__")}
        ds = Dataset(doc["system_id"], z["raw_inputs"], z["cond"],
                     z["targets"], PriorSpec.from_dict(doc["prior"]),
                     doc["matching"], z["train_idx"], z["test_idx"],
                     meta=doc["meta"], extra=extra)
    return ds

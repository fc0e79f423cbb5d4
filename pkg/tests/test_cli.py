import json
import os

import numpy as np
import pytest

from bifurcflow import cli, nn
from bifurcflow.cli import ConfigError, config_hash, load_config, main


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def base_config(tmp_path, **extra):
    doc = {
        "system_id": "two_deltas",
        "seed": 0,
        "outdir": str(tmp_path / "runs"),
        "dataset": {"n_train": 40, "n_test": 10},
        "training": {"epochs": 2, "batch_size": 16, "lr": 1e-3,
                     "matched": False},
        "sampler": {"num_steps": 5},
        "eval": {"n_pred": 8, "split": "test", "max_records": 3},
    }
    doc.update(extra)
    return doc


class TestConfigLoading:
    def test_unknown_key_rejected(self, tmp_path):
        path = write_config(tmp_path, {"system_id": "two_deltas",
                                       "learning_rate": 1.0})
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unknown_nested_key_rejected(self, tmp_path):
        path = write_config(tmp_path, {"system_id": "two_deltas",
                                       "training": {"momentum": 0.9}})
        with pytest.raises(ConfigError):
            load_config(path)

    def test_type_errors(self, tmp_path):
        path = write_config(tmp_path, {"system_id": "two_deltas",
                                       "training": {"epochs": "many"}})
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unknown_system_rejected(self, tmp_path):
        path = write_config(tmp_path, {"system_id": "weather"})
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "nope.json"))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_dotted_overrides(self, tmp_path):
        path = write_config(tmp_path, {"system_id": "two_deltas",
                                       "training": {"epochs": 5}})
        cfg = load_config(path, ["training.epochs=9", "seed=3"])
        assert cfg["training"]["epochs"] == 9
        assert cfg["seed"] == 3

    def test_bad_override_format(self, tmp_path):
        path = write_config(tmp_path, {"system_id": "two_deltas"})
        with pytest.raises(ConfigError):
            load_config(path, ["epochs"])

    def test_config_hash_stable_and_order_free(self):
        a = {"system_id": "two_deltas", "seed": 1}
        b = {"seed": 1, "system_id": "two_deltas"}
        assert config_hash(a) == config_hash(b)
        assert len(config_hash(a)) == 16
        assert config_hash(a) != config_hash({"system_id": "two_deltas",
                                              "seed": 2})


class TestExitCodes:
    def test_config_error_exits_1(self, tmp_path, capsys):
        path = write_config(tmp_path, {"system_id": "weather"})
        assert main(["--config", path, "gen"]) == 1
        assert "config error" in capsys.readouterr().err

    def test_missing_dataset_exits_2(self, tmp_path, capsys):
        path = write_config(tmp_path, base_config(tmp_path))
        assert main(["--config", path, "train"]) == 2
        assert "run `gen` first" in capsys.readouterr().err

    def test_missing_checkpoint_exits_2(self, tmp_path, capsys):
        path = write_config(tmp_path, base_config(tmp_path))
        assert main(["--config", path, "gen"]) == 0
        assert main(["--config", path, "eval"]) == 2
        assert "checkpoint not found" in capsys.readouterr().err


class TestPipeline:
    def test_gen_train_eval_sample(self, tmp_path, capsys):
        path = write_config(tmp_path, base_config(tmp_path))
        outdir = tmp_path / "runs" / "two_deltas"

        assert main(["--config", path, "gen"]) == 0
        assert (outdir / "dataset" / "data.npz").exists()
        meta = json.loads((outdir / "dataset" / "meta.json").read_text())
        assert meta["system_id"] == "two_deltas"
        assert "checksum_sha256" in meta and "config_hash" in meta

        assert main(["--config", path, "train"]) == 0
        ckpt = outdir / "model_unmatched.json"
        assert ckpt.exists()
        loss_lines = (outdir / "loss_unmatched.csv").read_text() \
            .strip().splitlines()
        assert len(loss_lines) == 1 + 2  # header plus one row per epoch

        assert main(["--config", path, "eval"]) == 0
        report = json.loads((outdir / "report.json").read_text())
        assert report["system"] == "two_deltas"
        assert report["metric"] == "wasserstein_1d"
        assert len(report["per_record"]) == 3
        assert report["n_pred"] == 8
        assert report["config_hash"] == config_hash(
            load_config(path))
        csv_lines = (outdir / "report.csv").read_text().strip().splitlines()
        assert csv_lines[0] == "system,metric,record,value"
        assert csv_lines[-1].split(",")[2] == "mean"

        assert main(["--config", path, "sample"]) == 0
        data = np.load(outdir / "samples.npz")
        assert data["samples"].shape == (3, 8, 1)

    def test_gen_is_idempotent(self, tmp_path, capsys):
        path = write_config(tmp_path, base_config(tmp_path))
        assert main(["--config", path, "gen"]) == 0
        first = (tmp_path / "runs" / "two_deltas" / "dataset" /
                 "meta.json").read_text()
        assert main(["--config", path, "gen"]) == 0
        out = capsys.readouterr().out
        assert "already up to date" in out
        second = (tmp_path / "runs" / "two_deltas" / "dataset" /
                  "meta.json").read_text()
        assert json.loads(first)["checksum_sha256"] == \
            json.loads(second)["checksum_sha256"]

    def test_gen_conflict_requires_overwrite(self, tmp_path, capsys):
        path = write_config(tmp_path, base_config(tmp_path))
        assert main(["--config", path, "gen"]) == 0
        assert main(["--config", path, "--set", "seed=5", "gen"]) == 2
        assert "use --overwrite" in capsys.readouterr().err
        assert main(["--config", path, "--set", "seed=5", "gen",
                     "--overwrite"]) == 0

    def test_epochs_zero_writes_untrained_checkpoint(self, tmp_path):
        doc = base_config(tmp_path)
        doc["training"]["epochs"] = 0
        path = write_config(tmp_path, doc)
        assert main(["--config", path, "gen"]) == 0
        assert main(["--config", path, "train"]) == 0
        outdir = tmp_path / "runs" / "two_deltas"
        arrays, meta, _ = nn.load_checkpoint(outdir / "model_unmatched.json")
        assert meta["epochs"] == 0
        lines = (outdir / "loss_unmatched.csv").read_text().strip().splitlines()
        assert len(lines) == 1  # header only

    def test_matched_and_unmatched_checkpoints_distinct(self, tmp_path):
        doc = base_config(tmp_path, system_id="coin_flip")
        doc["dataset"] = {"n_train": 40, "n_test": 10}
        path = write_config(tmp_path, doc)
        assert main(["--config", path, "gen"]) == 0
        assert main(["--config", path, "train"]) == 0
        assert main(["--config", path, "--set", "training.matched=true",
                     "train"]) == 0
        outdir = tmp_path / "runs" / "coin_flip"
        _, meta_u, _ = nn.load_checkpoint(outdir / "model_unmatched.json")
        _, meta_m, _ = nn.load_checkpoint(outdir / "model_matched.json")
        assert meta_u["matched"] is False
        assert meta_m["matched"] is True

    def test_env_var_output_root(self, tmp_path, monkeypatch):
        doc = base_config(tmp_path)
        del doc["outdir"]
        monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "envout"))
        path = write_config(tmp_path, doc)
        assert main(["--config", path, "gen"]) == 0
        assert (tmp_path / "envout" / "two_deltas" / "dataset").exists()


class TestBifurcationCommand:
    def test_ground_truth_scan(self, tmp_path):
        doc = base_config(tmp_path, system_id="allen_cahn")
        doc["bifurcation"] = {"mu_values": [-0.1], "n_samples_per_mu": 2,
                              "ground_truth": True}
        path = write_config(tmp_path, doc)
        assert main(["--config", path, "bifurcation"]) == 0
        csv = (tmp_path / "runs" / "allen_cahn" /
               "bifurcation.csv").read_text().strip().splitlines()
        assert csv[0] == "mu,statistic"
        assert len(csv) == 3

    def test_model_scan_rejects_wrong_system(self, tmp_path, capsys):
        doc = base_config(tmp_path)
        doc["bifurcation"] = {"mu_values": [0.5]}
        path = write_config(tmp_path, doc)
        assert main(["--config", path, "gen"]) == 0
        assert main(["--config", path, "train"]) == 0
        ckpt = str(tmp_path / "runs" / "two_deltas" / "model_unmatched.json")
        doc2 = dict(doc, system_id="allen_cahn")
        path2 = write_config(tmp_path, doc2, name="c2.json")
        assert main(["--config", path2, "bifurcation",
                     "--checkpoint", ckpt]) == 2
        assert "allen_cahn" in capsys.readouterr().err

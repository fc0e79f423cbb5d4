"""End-to-end helpers tying datasets, models, training and checkpoints.

These are the functions the command line drives; tests use them directly.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .datasets import Dataset
from .flow import train
from .metrics import wasserstein_1d, TargetDistribution
from .models import DeterministicBaseline, build_model

TRAIN_DEFAULTS = {
    "two_deltas": {"epochs": 2500, "batch_size": 256, "lr": 1e-3},
    "coin_flip": {"epochs": 3200, "batch_size": 128, "lr": 1e-3},
    "three_roads": {"epochs": 800, "batch_size": 128, "lr": 1e-3},
    "four_node": {"epochs": 60, "batch_size": 128, "lr": 1e-3},
    "beam": {"epochs": 2000, "batch_size": 64, "lr": 1e-3},
    "allen_cahn": {"epochs": 30, "batch_size": 16, "lr": 2e-3},
}


def train_flow_model(dataset: Dataset, seed=0, matched=True, epochs=None,
                     batch_size=None, lr=None, arch=None, split="train"):
    """Build and train the default velocity model for a dataset.

    matched=False trains plain flow matching (identity pairing).
    Returns (model, history).
    """
    defaults = TRAIN_DEFAULTS[dataset.system_id]
    epochs = defaults["epochs"] if epochs is None else int(epochs)
    batch_size = defaults["batch_size"] if batch_size is None \
        else int(batch_size)
    lr = defaults["lr"] if lr is None else float(lr)
    model = build_model(dataset.system_id, arch=arch, seed=seed)
    matcher = dataset.matcher() if matched else None
    _, history = train(model, dataset.training_set(split), dataset.prior,
                       matcher, epochs=epochs, batch_size=batch_size, lr=lr,
                       seed=seed, x0_transform=dataset.x0_transform())
    model.trained = True
    return model, history


def save_model(path, model, system_id, seed, matched, arch=None, extra=None):
    meta = {
        "system_id": system_id,
        "seed": int(seed),
        "matched": bool(matched),
        "arch": arch or {},
        "trained": bool(getattr(model, "trained", False)),
    }
    meta.update(extra or {})
    nn.save_checkpoint(path, {"params": np.asarray(model.params)}, meta,
                       seed=seed)


def load_model(path):
    """Rebuild a velocity model from a checkpoint. Returns (model, meta)."""
    arrays, meta, _ = nn.load_checkpoint(path)
    model = build_model(meta["system_id"], arch=meta.get("arch") or None,
                        seed=meta.get("seed", 0))
    params = arrays["params"]
    if params.shape != model.params.shape:
        raise ValueError(
            f"checkpoint has {params.size} parameters, model expects "
            f"{model.params.size}")
    model.params = params
    model.trained = bool(meta.get("trained", True))
    return model, meta


# ---------------------------------------------------------------------------
# deterministic baseline (scalar-output systems)

def train_baseline(dataset: Dataset, seed=0, epochs=100, hidden=(32, 32)):
    """MSE regressor from conditioning to target; collapses multimodal
    outputs to their conditional mean."""
    ts = dataset.training_set("train")
    scale = max(1.0, float(np.max(np.abs(ts.cond))) or 1.0)
    out_scale = max(1.0, float(np.max(np.abs(ts.x1))))
    model = DeterministicBaseline(ts.cond.shape[1], ts.x1.shape[1],
                                  hidden=hidden, in_scale=scale,
                                  out_scale=out_scale, seed=seed)
    model.fit(ts.cond, ts.x1, epochs=epochs, seed=seed)
    return model


def evaluate_baseline(baseline, dataset: Dataset, split="test",
                      max_records=None):
    """Mean 1-D W1 of the single deterministic prediction per record."""
    if dataset.targets.shape[1] != 1:
        raise ValueError("baseline evaluation only supports scalar targets")
    idx = dataset.indices(split)
    if max_records is not None:
        idx = idx[:max_records]
    preds = baseline.predict(dataset.cond[idx])
    scores = []
    for r, i in enumerate(idx):
        atoms, weights = dataset.allowed_outcomes(i)
        scores.append(wasserstein_1d(preds[r],
                                     TargetDistribution(atoms, weights)))
    return float(np.mean(scores)), scores

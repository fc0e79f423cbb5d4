"""Conditional flow matching: linear interpolation path, velocity
regression loss, training loop with pluggable symmetric matcher, and the
deterministic ODE sampler.

Velocity models are duck-typed; they expose

    params          flat float64 vector (get/set)
    forward(X, t, C)  -> (V, cache)      batched velocity + backprop cache
    backward(cache, U) -> dparams        gradient of sum(U * V)

with X, V of shape (B, D), t scalar or (B,), C of shape (B, Dc).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import priors
from .nn import NonFiniteError, ShapeError, adam_init, adam_step
from .symmetry import SymmetryGroup, match_batch


@dataclass
class FlowBatch:
    x0: np.ndarray
    x1: np.ndarray
    cond: np.ndarray
    t: float

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=np.float64)
        self.x1 = np.asarray(self.x1, dtype=np.float64)
        self.cond = np.asarray(self.cond, dtype=np.float64)
        if self.x0.shape != self.x1.shape:
            raise ShapeError(
                f"x0 {self.x0.shape} and x1 {self.x1.shape} differ")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t={self.t} outside [0, 1]")


@dataclass(frozen=True)
class SamplerConfig:
    num_steps: int = 100
    integrator: str = "euler"

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if self.integrator not in ("euler", "midpoint"):
            raise ValueError(f"unknown integrator {self.integrator!r}")


def interpolate(x0, x1, t):
    """Linear path (1 - t) x0 + t x1."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.shape != x1.shape:
        raise ShapeError(f"length mismatch {x0.shape} vs {x1.shape}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("t outside [0, 1]")
    if t.ndim == 1 and x0.ndim == 2:
        t = t[:, None]
    return (1.0 - t) * x0 + t * x1


def cfm_loss(model, batch) -> float:
    """Mean over the batch of ||v(x_t, t, cond) - (x1 - x0)||^2."""
    if not batch:
        raise ValueError("empty batch")
    total = 0.0
    for fb in batch:
        xt = interpolate(fb.x0, fb.x1, fb.t)
        v = model.velocity(xt, fb.t, fb.cond)
        total += float(np.sum((v - (fb.x1 - fb.x0)) ** 2))
    return total / len(batch)


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainingSet:
    """Targets plus conditioning; prior_center feeds conditional priors."""

    x1: np.ndarray            # (N, D)
    cond: np.ndarray          # (N, Dc); may have zero columns
    prior_center: np.ndarray | None = None  # (N, D) for conditional priors

    def __post_init__(self):
        self.x1 = np.asarray(self.x1, dtype=np.float64)
        self.cond = np.asarray(self.cond, dtype=np.float64)
        if self.x1.ndim != 2 or self.cond.ndim != 2:
            raise ShapeError("x1 and cond must be 2-D arrays")
        if self.cond.shape[0] != self.x1.shape[0]:
            raise ShapeError("x1 and cond row counts differ")
        if self.prior_center is not None:
            self.prior_center = np.asarray(self.prior_center, dtype=np.float64)
            if self.prior_center.shape != self.x1.shape:
                raise ShapeError("prior_center must match x1 shape")

    def __len__(self):
        return self.x1.shape[0]


def _resolve_matcher(matcher):
    if matcher is None:
        return lambda X0, X1, C: X1
    if isinstance(matcher, SymmetryGroup):
        return lambda X0, X1, C: match_batch(X0, X1, matcher)
    return matcher


def train(model, dataset: TrainingSet, prior: priors.PriorSpec, matcher,
          epochs: int, batch_size: int, lr: float, seed: int,
          resample_targets=None, x0_transform=None):
    """Seeded CFM training loop.

    matcher: None (identity), a SymmetryGroup, or a callable
    (X0, X1, C) -> X1'.
    resample_targets: optional callable rng -> TrainingSet drawing a fresh
    dataset each epoch (used by systems with unlimited data).
    x0_transform: optional (X0, C) -> X0 hook applied to prior draws
    (e.g. masking padded coordinates).
    Returns (params, history) with one (epoch, mean_loss, wall_time_s)
    entry per epoch.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    match = _resolve_matcher(matcher)
    rng = np.random.default_rng(seed)
    state = adam_init(model.params.size, lr=lr)
    params = model.params
    history = []
    t_start = time.perf_counter()
    for epoch in range(epochs):
        if resample_targets is not None:
            dataset = resample_targets(rng)
        order = rng.permutation(len(dataset))
        losses = []
        for lo in range(0, len(dataset), batch_size):
            idx = order[lo:lo + batch_size]
            X1 = dataset.x1[idx]
            C = dataset.cond[idx]
            center = (dataset.prior_center[idx]
                      if dataset.prior_center is not None else None)
            X0 = priors.sample_prior(prior, rng, cond_center=center,
                                     batch=len(idx))
            if x0_transform is not None:
                X0 = x0_transform(X0, C)
            X1m = match(X0, X1, C)
            t = rng.uniform(0.0, 1.0, size=len(idx))
            Xt = interpolate(X0, X1m, t)
            target = X1m - X0
            model.params = params
            V, cache = model.forward(Xt, t, C)
            resid = V - target
            loss = float(np.mean(np.sum(resid * resid, axis=1)))
            if not np.isfinite(loss):
                raise NonFiniteError(
                    f"non-finite loss at epoch {epoch}, batch offset {lo}")
            grads = model.backward(cache, 2.0 * resid / len(idx))
            params, state = adam_step(params, grads, state)
            losses.append(loss)
        model.params = params
        history.append((epoch, float(np.mean(losses)),
                        time.perf_counter() - t_start))
    model.params = params
    return params, history


def write_loss_csv(path, history):
    with open(path, "w") as f:
        f.write("epoch,mean_loss,wall_time_s\n")
        for epoch, loss, wt in history:
            f.write(f"{epoch},{loss:.10g},{wt:.4f}\n")


# ---------------------------------------------------------------------------
# sampling

def sample_batch(model, X0, C, config: SamplerConfig = SamplerConfig()):
    """Integrate dx/dt = v(x, t, cond) from t=0 to 1 for a batch of draws."""
    X = np.array(X0, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError("X0 must be (B, D)")
    C = np.asarray(C, dtype=np.float64)
    n = config.num_steps
    dt = 1.0 / n
    for i in range(n):
        t = i * dt
        if config.integrator == "euler":
            X = X + dt * model.velocity_batch(X, t, C)
        else:  # midpoint
            half = X + 0.5 * dt * model.velocity_batch(X, t, C)
            X = X + dt * model.velocity_batch(half, t + 0.5 * dt, C)
        if not np.all(np.isfinite(X)):
            raise NonFiniteError(f"non-finite state at integration step {i}")
    return X


def sample(model, x0, cond, config: SamplerConfig = SamplerConfig()):
    """Single-draw convenience wrapper around sample_batch."""
    x0 = np.asarray(x0, dtype=np.float64)
    cond = np.asarray(cond, dtype=np.float64)
    out = sample_batch(model, x0[None, :], cond[None, :], config)
    return out[0]

"""Invariant base distributions for flow matching.

Three kinds: isotropic Gaussian, Gaussian centered at the conditioning
input, and a time-cumulative random walk (per spatial location, entries
are running sums of i.i.d. Gaussian steps along the time axis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("gaussian", "conditional_gaussian", "random_walk")


@dataclass(frozen=True)
class PriorSpec:
    kind: str
    sigma: float
    shape: tuple  # feature dims; (T, n_space) for random_walk

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        shape = tuple(int(s) for s in self.shape)
        if not shape or any(s < 1 for s in shape):
            raise ValueError(f"bad prior shape {shape}")
        object.__setattr__(self, "shape", shape)

    @property
    def dim(self):
        return int(np.prod(self.shape))

    def to_dict(self):
        return {"kind": self.kind, "sigma": self.sigma, "shape": list(self.shape)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], float(d["sigma"]), tuple(d["shape"]))


def sample_gaussian(shape, sigma, rng, batch=None):
    """i.i.d. N(0, sigma^2) entries; flat vector(s). sigma=0 degenerates to 0."""
    full = shape if batch is None else (batch,) + tuple(shape)
    out = sigma * rng.standard_normal(full)
    return out.reshape(-1) if batch is None else out.reshape(batch, -1)


def sample_conditional(x_input, sigma, rng, batch=None):
    """Conditioning input plus i.i.d. N(0, sigma^2) noise.

    x_input may be a single center (D,) or per-row centers (B, D).
    """
    x_input = np.asarray(x_input, dtype=np.float64)
    if x_input.ndim == 1:
        if batch is None:
            return x_input + sigma * rng.standard_normal(x_input.size)
        return x_input[None, :] + sigma * rng.standard_normal(
            (batch, x_input.size))
    if batch is not None and batch != x_input.shape[0]:
        raise ValueError(
            f"batch {batch} != number of centers {x_input.shape[0]}")
    return x_input + sigma * rng.standard_normal(x_input.shape)


def sample_random_walk(T, spatial_dims, step_sigma, rng, batch=None):
    """Cumulative Gaussian walk along time, independent per spatial location.

    entry[t, s] = sum_{r <= t} xi[r, s], xi ~ N(0, step_sigma^2).
    Returns flat vector(s) of length T * prod(spatial_dims).
    """
    spatial = tuple(int(s) for s in np.atleast_1d(spatial_dims))
    full = (int(T),) + spatial if batch is None else (batch, int(T)) + spatial
    steps = step_sigma * rng.standard_normal(full)
    walk = np.cumsum(steps, axis=0 if batch is None else 1)
    return walk.reshape(-1) if batch is None else walk.reshape(batch, -1)


def sample_prior(spec: PriorSpec, rng, cond_center=None, batch=None):
    """Draw from a PriorSpec; cond_center is required for conditional kind."""
    if spec.kind == "gaussian":
        return sample_gaussian(spec.shape, spec.sigma, rng, batch=batch)
    if spec.kind == "conditional_gaussian":
        if cond_center is None:
            raise ValueError("conditional prior needs a center")
        return sample_conditional(cond_center, spec.sigma, rng, batch=batch)
    T, *spatial = spec.shape
    return sample_random_walk(T, spatial if spatial else (1,), spec.sigma,
                              rng, batch=batch)

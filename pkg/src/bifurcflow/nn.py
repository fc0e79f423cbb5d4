"""Dense neural-network substrate: MLPs with hand-coded backprop and Adam.

Parameters live in a single flat float64 vector. The canonical flattening
order is, per layer: weight matrix in row-major order (shape out x in),
then the bias vector. This order is what the checkpoint format stores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np


class ShapeError(ValueError):
    """Input/parameter dimensions do not match the spec."""


class NonFiniteError(FloatingPointError):
    """A non-finite value appeared where training must abort loudly."""


# ---------------------------------------------------------------------------
# activations

def _tanh(z):
    return np.tanh(z)


def _dtanh(z, a):
    return 1.0 - a * a


def _relu(z):
    return np.maximum(z, 0.0)


def _drelu(z, a):
    return (z > 0.0).astype(z.dtype)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _silu(z):
    return z * _sigmoid(z)


def _dsilu(z, a):
    s = _sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


_ACTIVATIONS = {
    "tanh": (_tanh, _dtanh),
    "relu": (_relu, _drelu),
    "silu": (_silu, _dsilu),
}


# ---------------------------------------------------------------------------
# spec

@dataclass(frozen=True)
class MLPSpec:
    """Fully-connected network: hidden activations, linear output layer."""

    layer_sizes: tuple
    activation: str = "silu"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ShapeError("layer_sizes needs at least input and output width")
        if any(s < 1 for s in sizes):
            raise ShapeError(f"all widths must be >= 1, got {sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_layers(self):
        return len(self.layer_sizes) - 1

    @property
    def n_params(self):
        return sum(
            o * i + o
            for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:])
        )

    def param_slices(self):
        """Yield (W_slice, b_slice, (out, in)) per layer, in canonical order."""
        off = 0
        for din, dout in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            wsl = slice(off, off + dout * din)
            off += dout * din
            bsl = slice(off, off + dout)
            off += dout
            yield wsl, bsl, (dout, din)


def init_params(spec: MLPSpec, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases, as one flat vector."""
    params = np.zeros(spec.n_params)
    for wsl, _, (dout, din) in spec.param_slices():
        bound = np.sqrt(6.0 / (din + dout))
        params[wsl] = rng.uniform(-bound, bound, size=dout * din)
    return params


def _check_params(spec, params):
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.size != spec.n_params:
        raise ShapeError(
            f"expected {spec.n_params} params, got shape {params.shape}"
        )
    return params


# ---------------------------------------------------------------------------
# forward / backward

def mlp_forward(spec: MLPSpec, params, X):
    """Batched forward pass.

    X has shape (B, d_in). Returns (Y, cache); the cache holds per-layer
    inputs and preactivations for mlp_backward.
    """
    params = _check_params(spec, params)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.layer_sizes[0]:
        raise ShapeError(
            f"expected input shape (B, {spec.layer_sizes[0]}), got {X.shape}"
        )
    act, _ = _ACTIVATIONS[spec.activation]
    inputs, preacts = [], []
    h = X
    n = spec.n_layers
    for li, (wsl, bsl, (dout, din)) in enumerate(spec.param_slices()):
        W = params[wsl].reshape(dout, din)
        b = params[bsl]
        inputs.append(h)
        z = h @ W.T + b
        preacts.append(z)
        h = act(z) if li < n - 1 else z
    return h, (inputs, preacts)


def mlp_backward(spec: MLPSpec, params, cache, dY):
    """Backprop the upstream gradient dY (B, d_out).

    Returns (dparams, dX) where dparams is flat in canonical order and the
    contributions are summed over the batch.
    """
    params = _check_params(spec, params)
    inputs, preacts = cache
    dY = np.asarray(dY, dtype=np.float64)
    if dY.shape != preacts[-1].shape:
        raise ShapeError(f"upstream shape {dY.shape} != {preacts[-1].shape}")
    act, dact = _ACTIVATIONS[spec.activation]
    slices = list(spec.param_slices())
    dparams = np.zeros_like(params)
    delta = dY
    n = spec.n_layers
    for li in range(n - 1, -1, -1):
        wsl, bsl, (dout, din) = slices[li]
        if li < n - 1:
            z = preacts[li]
            delta = delta * dact(z, act(z))
        dparams[wsl] = (delta.T @ inputs[li]).ravel()
        dparams[bsl] = delta.sum(axis=0)
        W = params[wsl].reshape(dout, din)
        delta = delta @ W
    return dparams, delta


def mlp_apply(spec: MLPSpec, params, x) -> np.ndarray:
    """Evaluate the network on a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"expected a 1-D input, got shape {x.shape}")
    y, _ = mlp_forward(spec, params, x[None, :])
    return y[0]


def mlp_gradient(spec: MLPSpec, params, x, upstream) -> np.ndarray:
    """Gradient of upstream . output with respect to the flat params."""
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.ndim != 1 or upstream.size != spec.layer_sizes[-1]:
        raise ShapeError(
            f"upstream must have length {spec.layer_sizes[-1]}, "
            f"got shape {upstream.shape}"
        )
    _, cache = mlp_forward(spec, params, x[None, :])
    dparams, _ = mlp_backward(spec, params, cache, upstream[None, :])
    return dparams


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    k: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(n_params: int, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(m=np.zeros(n_params), v=np.zeros(n_params),
                     k=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params, grads, state: AdamState):
    """One bias-corrected Adam update. Returns (new_params, new_state)."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeError(
            f"params {params.shape}, grads {grads.shape}, "
            f"state {state.m.shape} must all match"
        )
    if not np.all(np.isfinite(grads)):
        raise NonFiniteError("non-finite gradient entry; aborting update")
    k = state.k + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    mhat = m / (1.0 - state.beta1 ** k)
    vhat = v / (1.0 - state.beta2 ** k)
    new_params = params - state.lr * mhat / (np.sqrt(vhat) + state.eps)
    return new_params, replace(state, m=m, v=v, k=k)


# ---------------------------------------------------------------------------
# checkpoint I/O
#
# Self-describing JSON; float64 arrays are stored as hex strings
# (float.hex) so round-trips are bit-exact.

_CKPT_FORMAT = "bifurcflow-checkpoint-v1"


def _array_to_doc(a):
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "hex": [v.hex() for v in a.ravel().tolist()]}


def _array_from_doc(doc):
    flat = np.array([float.fromhex(h) for h in doc["hex"]], dtype=np.float64)
    return flat.reshape(doc["shape"])


def save_checkpoint(path, arrays: dict, meta: dict | None = None,
                    seed: int | None = None) -> None:
    doc = {
        "format": _CKPT_FORMAT,
        "seed": seed,
        "meta": meta or {},
        "arrays": {k: _array_to_doc(v) for k, v in arrays.items()},
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_checkpoint(path):
    """Returns (arrays, meta, seed)."""
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != _CKPT_FORMAT:
        raise ValueError(f"not a {_CKPT_FORMAT} file: {path}")
    arrays = {k: _array_from_doc(v) for k, v in doc["arrays"].items()}
    return arrays, doc["meta"], doc["seed"]

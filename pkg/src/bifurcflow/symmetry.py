"""Finite group actions on sample vectors, symmetric matching, and
group-averaging equivariantization of velocity models.

Every action operates on the flat feature axis (the last axis of the
array), so batches of samples transform in one call. Supported kinds:

  identity        x -> x
  sign_flip       x -> -x
  reflect_x       negate a designated subset of components
  permute         permute node blocks of a node-structured vector
  circular_shift  roll a periodic axis by k (same shift for every
                  leading slice, e.g. every time step of a trajectory)
  point_reflect   x -> 2c - x (affine; used for two-solution swaps)

All kinds except point_reflect are signed permutations, hence
norm-preserving and orthogonal.
"""

from __future__ import annotations

import numpy as np


class ActionError(ValueError):
    """Action incompatible with the sample structure."""


class GroupAction:
    def __init__(self, kind, *, perm=None, node_feat=1, shift=None,
                 axis_len=None, mask=None, center=None, cond_action=None):
        if kind not in ("identity", "sign_flip", "reflect_x", "permute",
                        "circular_shift", "point_reflect"):
            raise ValueError(f"unknown action kind {kind!r}")
        self.kind = kind
        self.perm = None if perm is None else np.asarray(perm, dtype=int)
        self.node_feat = int(node_feat)
        self.shift = None if shift is None else int(shift)
        self.axis_len = None if axis_len is None else int(axis_len)
        self.mask = None if mask is None else np.asarray(mask, dtype=bool)
        self.center = None if center is None else np.asarray(center, dtype=np.float64)
        # action applied to the conditioning vector; None means identity
        self.cond_action = cond_action
        if kind == "permute" and self.perm is None:
            raise ValueError("permute action needs a permutation")
        if kind == "circular_shift" and (self.shift is None or self.axis_len is None):
            raise ValueError("circular_shift needs shift and axis_len")
        if kind == "point_reflect" and self.center is None:
            raise ValueError("point_reflect needs a center")

    def __repr__(self):
        extra = ""
        if self.kind == "permute":
            extra = f" perm={self.perm.tolist()}"
        elif self.kind == "circular_shift":
            extra = f" k={self.shift} n={self.axis_len}"
        return f"<GroupAction {self.kind}{extra}>"

    # -- application -------------------------------------------------------

    def apply(self, x):
        """Transform x; the last axis is the flat feature vector."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "sign_flip":
            return -x
        if self.kind == "reflect_x":
            if self.mask is None:
                return -x
            if self.mask.size != x.shape[-1]:
                raise ActionError(
                    f"mask length {self.mask.size} != feature dim {x.shape[-1]}")
            out = x.copy()
            out[..., self.mask] = -out[..., self.mask]
            return out
        if self.kind == "permute":
            n = self.perm.size
            f = self.node_feat
            if x.shape[-1] != n * f:
                raise ActionError(
                    f"permute expects {n * f} features, got {x.shape[-1]}")
            blocks = x.reshape(x.shape[:-1] + (n, f))
            return blocks[..., self.perm, :].reshape(x.shape)
        if self.kind == "circular_shift":
            n = self.axis_len
            if x.shape[-1] % n != 0:
                raise ActionError(
                    f"feature dim {x.shape[-1]} not a multiple of axis length {n}")
            grid = x.reshape(x.shape[:-1] + (x.shape[-1] // n, n))
            return np.roll(grid, self.shift, axis=-1).reshape(x.shape)
        # point_reflect
        if self.center.size != x.shape[-1]:
            raise ActionError(
                f"center length {self.center.size} != feature dim {x.shape[-1]}")
        return 2.0 * self.center - x

    def apply_linear(self, x):
        """Apply only the linear part (relevant for velocities/tangents)."""
        if self.kind == "point_reflect":
            return -np.asarray(x, dtype=np.float64)
        return self.apply(x)

    def apply_cond(self, c):
        if self.cond_action is None:
            return np.asarray(c, dtype=np.float64).copy()
        return self.cond_action.apply(c)

    def inverse(self):
        if self.kind == "permute":
            inv = np.empty_like(self.perm)
            inv[self.perm] = np.arange(self.perm.size)
            return GroupAction("permute", perm=inv, node_feat=self.node_feat,
                               cond_action=None if self.cond_action is None
                               else self.cond_action.inverse())
        if self.kind == "circular_shift":
            return GroupAction("circular_shift",
                               shift=(-self.shift) % self.axis_len,
                               axis_len=self.axis_len,
                               cond_action=None if self.cond_action is None
                               else self.cond_action.inverse())
        # identity, sign_flip, reflect_x, point_reflect are involutions
        return self

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        d = {"kind": self.kind}
        if self.perm is not None:
            d["perm"] = self.perm.tolist()
            d["node_feat"] = self.node_feat
        if self.shift is not None:
            d["shift"] = self.shift
            d["axis_len"] = self.axis_len
        if self.mask is not None:
            d["mask"] = self.mask.astype(int).tolist()
        if self.center is not None:
            d["center"] = self.center.tolist()
        if self.cond_action is not None:
            d["cond_action"] = self.cond_action.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        kw = dict(d)
        kind = kw.pop("kind")
        if "cond_action" in kw:
            kw["cond_action"] = cls.from_dict(kw["cond_action"])
        return cls(kind, **kw)


def apply(action: GroupAction, x):
    """Module-level alias for GroupAction.apply."""
    return action.apply(x)


class SymmetryGroup:
    """Finite list of actions, identity first (canonical enumeration order).

    For small groups closure under composition is verified numerically on
    random probe vectors at construction; cyclic shift groups are closed
    by construction and skip the check.
    """

    def __init__(self, actions, check_closure=None, probe_dim=None, name=""):
        if not actions:
            raise ValueError("empty group")
        self.actions = list(actions)
        self.name = name
        if self.actions[0].kind != "identity":
            raise ValueError("first action must be the identity")
        if check_closure is None:
            check_closure = len(self.actions) <= 8 and probe_dim is not None
        if check_closure:
            self._verify_closure(probe_dim)

    def __len__(self):
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def _verify_closure(self, probe_dim):
        rng = np.random.default_rng(0)
        probes = rng.standard_normal((3, probe_dim))
        images = [a.apply(probes) for a in self.actions]
        for a in self.actions:
            for img in images:
                composed = a.apply(img)
                if not any(np.allclose(composed, other, atol=1e-12)
                           for other in images):
                    raise ValueError(
                        f"group not closed under composition ({a!r})")
            inv_img = a.inverse().apply(a.apply(probes))
            if not np.allclose(inv_img, probes, atol=1e-12):
                raise ValueError(f"inverse of {a!r} is wrong")

    def to_dict(self):
        return {"name": self.name, "actions": [a.to_dict() for a in self.actions]}

    @classmethod
    def from_dict(cls, d):
        return cls([GroupAction.from_dict(a) for a in d["actions"]],
                   check_closure=False, name=d.get("name", ""))

    # -- common constructions ----------------------------------------------

    @classmethod
    def trivial(cls):
        return cls([GroupAction("identity")], check_closure=False,
                   name="trivial")

    @classmethod
    def coin_flip(cls):
        return cls([GroupAction("identity"), GroupAction("sign_flip")],
                   check_closure=False, name="coin_flip")

    @classmethod
    def cyclic_shifts(cls, axis_len):
        actions = [GroupAction("identity")]
        actions += [GroupAction("circular_shift", shift=k, axis_len=axis_len)
                    for k in range(1, axis_len)]
        return cls(actions, check_closure=False, name=f"cyclic_{axis_len}")

    @classmethod
    def solution_swap(cls, center):
        """Two-element group {identity, y -> 2c - y}."""
        return cls([GroupAction("identity"),
                    GroupAction("point_reflect", center=center)],
                   check_closure=False, name="solution_swap")


# ---------------------------------------------------------------------------
# symmetric matching

def symmetric_match(x0, x1, group: SymmetryGroup, cost="sq_euclidean"):
    """Pick g minimizing ||x0 - g.x1||^2; ties go to the earliest action.

    Returns (g.x1, g).
    """
    if cost != "sq_euclidean":
        raise ValueError(f"unsupported cost {cost!r}")
    if len(group) == 0:
        raise ValueError("empty group")
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    best_cost = np.inf
    best = None
    for a in group:
        cand = a.apply(x1)
        c = float(np.sum((x0 - cand) ** 2))
        if c < best_cost:
            best_cost = c
            best = (cand, a)
    return best


def match_batch(X0, X1, group: SymmetryGroup):
    """Vectorized symmetric matching over a batch (rows are samples).

    Cyclic shift groups use the FFT cross-correlation path; other groups
    enumerate their actions. Returns the matched targets (same shape as X1).
    """
    X0 = np.asarray(X0, dtype=np.float64)
    X1 = np.asarray(X1, dtype=np.float64)
    shifts = [a for a in group if a.kind == "circular_shift"]
    if shifts and len(shifts) == len(group) - 1:
        n = shifts[0].axis_len
        if len(group) == n:  # the full cyclic group: use FFT alignment
            out = np.empty_like(X1)
            for i in range(X0.shape[0]):
                k = best_circular_shift_fft(
                    X0[i].reshape(-1, n), X1[i].reshape(-1, n))
                out[i] = GroupAction("circular_shift", shift=k,
                                     axis_len=n).apply(X1[i])
            return out
    costs = np.stack(
        [np.sum((X0 - a.apply(X1)) ** 2, axis=-1) for a in group], axis=1)
    pick = np.argmin(costs, axis=1)
    out = np.empty_like(X1)
    for gi, a in enumerate(group):
        rows = pick == gi
        if np.any(rows):
            out[rows] = a.apply(X1[rows])
    return out


def best_circular_shift_fft(x0, x1) -> int:
    """Shift k maximizing the circular cross-correlation of x0 with x1.

    Accepts 1-D signals or (rows, n) stacks sharing one global shift
    (correlations are summed over rows). Ties break to the smallest k >= 0.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    x1 = np.atleast_2d(np.asarray(x1, dtype=np.float64))
    if x0.shape != x1.shape or x0.shape[-1] == 0:
        raise ActionError(f"incompatible shapes {x0.shape}, {x1.shape}")
    n = x0.shape[-1]
    spec = np.sum(np.fft.rfft(x0, axis=-1) * np.conj(np.fft.rfft(x1, axis=-1)),
                  axis=0)
    corr = np.fft.irfft(spec, n)
    return int(np.argmax(corr))


def matched_dataset_view(pairs, group: SymmetryGroup, cost="sq_euclidean"):
    """Stream FlowBatch items with each target replaced by its best match.

    `pairs` yields (x0, x1, cond, t) tuples; x0 passes through untouched.
    """
    from .flow import FlowBatch

    for x0, x1, cond, t in pairs:
        x1m, _ = symmetric_match(x0, x1, group, cost)
        yield FlowBatch(x0=np.asarray(x0, dtype=np.float64), x1=x1m,
                        cond=np.asarray(cond, dtype=np.float64), t=float(t))


# ---------------------------------------------------------------------------
# equivariantization by group averaging

class EquivariantizedModel:
    """v'(x,t,c) = (1/|G|) sum_g g^-1 . v(g.x, t, g.c).

    Exactly equivariant: v'(g.x, t, g.c) = g.v'(x, t, c) for every g in G.
    Wraps any velocity model exposing params / velocity_batch / vjp_params.
    """

    def __init__(self, base, group: SymmetryGroup):
        self.base = base
        self.group = group

    @property
    def params(self):
        return self.base.params

    @params.setter
    def params(self, value):
        self.base.params = value

    def forward(self, X, t, C):
        acc = None
        caches = []
        for a in self.group:
            v, cache = self.base.forward(a.apply(X), t, a.apply_cond(C))
            caches.append(cache)
            term = a.inverse().apply_linear(v)
            acc = term if acc is None else acc + term
        return acc / len(self.group), caches

    def backward(self, caches, U):
        inv_n = 1.0 / len(self.group)
        acc = None
        for a, cache in zip(self.group, caches):
            # d sum(U * g^-1.v) / dv = (g^-1)^T U = a.apply_linear(U)
            # since all linear parts are orthogonal (or -I).
            g = self.base.backward(cache, a.apply_linear(U) * inv_n)
            acc = g if acc is None else acc + g
        return acc

    def velocity_batch(self, X, t, C):
        return self.forward(X, t, C)[0]

    def velocity(self, x, t, cond):
        v, _ = self.forward(np.asarray(x)[None, :], t,
                            np.asarray(cond, dtype=np.float64)[None, :])
        return v[0]


def equivariantize(model, group: SymmetryGroup):
    return EquivariantizedModel(model, group)

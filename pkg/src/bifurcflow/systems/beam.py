"""Buckling-beam ground truth: constrained strain-energy minimization.

The beam is n hinged segments with Hencky strains eps_i and angles q_i
(from vertical). We minimize

    U(q, eps) = 1/2 [ K_1 q_1^2 + sum_{i>=2} K_i (q_i - q_{i-1})^2
                      + sum_i L_i C_i eps_i^2 ]

subject to the tip-displacement constraint

    g(q, eps) = sum_i L_i (1 - exp(eps_i) cos q_i) - d = 0

via damped Newton iterations on the KKT stationarity system, warm-started
along the displacement schedule. Stability is judged by the Hessian of the
Lagrangian projected onto the constraint tangent space; when the symmetric
state turns unstable, the state is nudged along the lowest eigenmode
(fair-random sign) and re-solved until a stable minimum is reached.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class BeamSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class BeamSpec:
    n: int
    L: np.ndarray
    C: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        for name in ("L", "C", "K"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (self.n,) or np.any(arr <= 0):
                raise ValueError(f"{name} must be {self.n} positive values")
            object.__setattr__(self, name, arr)
        if not 2 <= self.n <= 11:
            raise ValueError(f"segment count {self.n} outside [2, 11]")

    @property
    def total_length(self):
        return float(np.sum(self.L))


@dataclass
class BeamState:
    q: np.ndarray
    eps: np.ndarray
    lam: float

    def copy(self):
        return BeamState(self.q.copy(), self.eps.copy(), float(self.lam))


@dataclass
class BeamTrajectory:
    spec: BeamSpec
    d_schedule: np.ndarray
    positions: np.ndarray   # (steps, n + 1, 2)
    qs: np.ndarray          # (steps, n)
    epss: np.ndarray        # (steps, n)
    lams: np.ndarray        # (steps,)


def sample_beam_spec(rng) -> BeamSpec:
    """n uniform on 2..11; L, C, K log-uniform on [0.5, 2]."""
    n = int(rng.integers(2, 12))
    lo, hi = np.log(0.5), np.log(2.0)
    draw = lambda: np.exp(rng.uniform(lo, hi, size=n))
    return BeamSpec(n=n, L=draw(), C=draw(), K=draw())


# ---------------------------------------------------------------------------
# energy, constraint, derivatives

def _bending_matrix(spec):
    n = spec.n
    D = np.eye(n)
    D[np.arange(1, n), np.arange(n - 1)] = -1.0
    return D.T @ np.diag(spec.K) @ D


def beam_energy(spec: BeamSpec, q, eps) -> float:
    A = _bending_matrix(spec)
    q = np.asarray(q, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    return float(0.5 * (q @ A @ q + np.sum(spec.L * spec.C * eps * eps)))


def _constraint(spec, q, eps, d):
    return float(np.sum(spec.L * (1.0 - np.exp(eps) * np.cos(q))) - d)


def _constraint_grad(spec, q, eps):
    e = np.exp(eps)
    return np.concatenate([spec.L * e * np.sin(q), -spec.L * e * np.cos(q)])


def _constraint_hess(spec, q, eps):
    n = spec.n
    e = np.exp(eps)
    lec = spec.L * e * np.cos(q)
    les = spec.L * e * np.sin(q)
    H = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    H[idx, idx] = lec
    H[n + idx, n + idx] = -lec
    H[idx, n + idx] = les
    H[n + idx, idx] = les
    return H


def kkt_residual(spec: BeamSpec, d, state: BeamState):
    """(inf-norm of Lagrangian gradient, |constraint|) at the state."""
    A = _bending_matrix(spec)
    grad_u = np.concatenate([A @ state.q, spec.L * spec.C * state.eps])
    grad = grad_u + state.lam * _constraint_grad(spec, state.q, state.eps)
    return float(np.max(np.abs(grad))), abs(
        _constraint(spec, state.q, state.eps, d))


def _kkt_system(spec, d, z):
    n = spec.n
    q, eps, lam = z[:n], z[n:2 * n], z[2 * n]
    A = _bending_matrix(spec)
    grad_u = np.concatenate([A @ q, spec.L * spec.C * eps])
    a = _constraint_grad(spec, q, eps)
    F = np.empty(2 * n + 1)
    F[:2 * n] = grad_u + lam * a
    F[2 * n] = _constraint(spec, q, eps, d)
    H = np.zeros((2 * n, 2 * n))
    H[:n, :n] = A
    H[n:, n:] = np.diag(spec.L * spec.C)
    H += lam * _constraint_hess(spec, q, eps)
    J = np.zeros((2 * n + 1, 2 * n + 1))
    J[:2 * n, :2 * n] = H
    J[:2 * n, 2 * n] = a
    J[2 * n, :2 * n] = a
    return F, J


def _newton_kkt(spec, d, z0, tol=1e-12, max_iter=200):
    z = z0.copy()
    F, J = _kkt_system(spec, d, z)
    norm = np.max(np.abs(F))
    for it in range(max_iter):
        if norm < tol:
            return z
        try:
            p = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            p = np.linalg.lstsq(J, -F, rcond=None)[0]
        alpha = 1.0
        for _ in range(40):
            z_new = z + alpha * p
            F_new, J_new = _kkt_system(spec, d, z_new)
            norm_new = np.max(np.abs(F_new))
            if norm_new < norm or norm_new < tol:
                break
            alpha *= 0.5
        z, F, J, norm = z_new, F_new, J_new, norm_new
    if norm < 1e-9:  # accept near-converged states (final kink of schedule)
        return z
    raise BeamSolveError(
        f"Newton stalled at d={d:.6g}: |F|_inf={norm:.3e} after {max_iter} it")


def projected_hessian_eigmin(spec: BeamSpec, d, state: BeamState):
    """Smallest eigenvalue of the Lagrangian Hessian on the constraint
    tangent space, plus the corresponding direction in (q, eps) space."""
    n = spec.n
    z = np.concatenate([state.q, state.eps, [state.lam]])
    _, J = _kkt_system(spec, d, z)
    H = J[:2 * n, :2 * n]
    a = J[:2 * n, 2 * n]
    Q, _ = np.linalg.qr(a[:, None], mode="complete")
    Z = Q[:, 1:]
    w, V = np.linalg.eigh(Z.T @ H @ Z)
    return float(w[0]), Z @ V[:, 0]


# ---------------------------------------------------------------------------
# per-step solve

_STAB_TOL = 1e-9


def solve_beam_step(spec: BeamSpec, d, warm_start: BeamState,
                    perturb=True, rng=None,
                    perturb_magnitude=1e-6) -> BeamState:
    """Solve the KKT system at displacement d from a warm start.

    If the converged state is unstable and perturb is set, the state is
    displaced along the lowest tangent eigenmode (random sign, escalating
    magnitude) and re-solved until a stable minimum is found.
    """
    if not 0.0 <= d <= spec.total_length + 1e-12:
        raise ValueError(f"d={d} outside [0, total length]")
    n = spec.n
    z0 = np.concatenate([warm_start.q, warm_start.eps, [warm_start.lam]])
    z = _newton_kkt(spec, d, z0)
    state = BeamState(z[:n], z[n:2 * n], float(z[2 * n]))
    if not perturb:
        return state
    eigmin, mode = projected_hessian_eigmin(spec, d, state)
    if eigmin >= -_STAB_TOL:
        return state
    if rng is None:
        rng = np.random.default_rng()
    sign = 1.0 if rng.random() < 0.5 else -1.0
    mag = perturb_magnitude
    for _ in range(14):
        zp = z.copy()
        zp[:2 * n] += sign * mag * mode
        try:
            z_new = _newton_kkt(spec, d, zp)
        except BeamSolveError:
            mag *= 10.0
            continue
        cand = BeamState(z_new[:n], z_new[n:2 * n], float(z_new[2 * n]))
        eig_new, _ = projected_hessian_eigmin(spec, d, cand)
        if eig_new >= -_STAB_TOL:
            return cand
        mag *= 10.0
    raise BeamSolveError(
        f"could not escape unstable state at d={d:.6g} (eigmin={eigmin:.3e})")


def beam_positions(spec: BeamSpec, state: BeamState):
    """(n + 1, 2) node coordinates; node 0 at the origin."""
    seg = spec.L * np.exp(state.eps)
    dx = seg * np.sin(state.q)
    dy = seg * np.cos(state.q)
    pos = np.zeros((spec.n + 1, 2))
    pos[1:, 0] = np.cumsum(dx)
    pos[1:, 1] = np.cumsum(dy)
    return pos


def solve_beam_trajectory(spec: BeamSpec, rng, n_steps=200,
                          perturb=True) -> BeamTrajectory:
    """Quasi-static sweep of d from 0 to the full beam length."""
    d_schedule = np.linspace(0.0, spec.total_length, n_steps)
    state = BeamState(np.zeros(spec.n), np.zeros(spec.n), 0.0)
    positions = np.zeros((n_steps, spec.n + 1, 2))
    qs = np.zeros((n_steps, spec.n))
    epss = np.zeros((n_steps, spec.n))
    lams = np.zeros(n_steps)
    for k, d in enumerate(d_schedule):
        state = solve_beam_step(spec, d, state, perturb=perturb, rng=rng)
        positions[k] = beam_positions(spec, state)
        qs[k] = state.q
        epss[k] = state.eps
        lams[k] = state.lam
    return BeamTrajectory(spec, d_schedule, positions, qs, epss, lams)


def gen_beam_dataset(n_beams, rng, n_steps=200):
    return [solve_beam_trajectory(sample_beam_spec(rng), rng, n_steps)
            for _ in range(n_beams)]


def beam_y_from_x(spec: BeamSpec, x_nodes):
    """Approximate node heights from x-coordinates for visualization,
    projecting each segment onto its unstrained length."""
    x = np.concatenate([[0.0], np.asarray(x_nodes, dtype=np.float64)])
    dx = np.diff(x)
    dy = np.sqrt(np.maximum(spec.L ** 2 - dx ** 2, 0.0))
    return np.concatenate([[0.0], np.cumsum(dy)])

"""Task-specific velocity networks and the deterministic baseline.

All networks are built on the MLP substrate in nn.py; their backward
passes are hand-coded. Each model keeps its weights in one flat vector
(`params`) and implements the forward/backward contract used by
flow.train. Equivariances (permutation, circular shift, reflection) hold
by construction, not by penalty.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .symmetry import GroupAction, SymmetryGroup, equivariantize

TEMB_DIM = 8
_TEMB_FREQS = np.pi * 2.0 ** np.arange(TEMB_DIM // 2)


def time_embedding(t, batch):
    """Sinusoidal features of the flow time, shape (batch, TEMB_DIM)."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        t = np.full(batch, float(t))
    ang = t[:, None] * _TEMB_FREQS[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


class _ParamBank:
    """Named MLPs sharing one flat parameter vector."""

    def __init__(self):
        self._specs = {}
        self._slices = {}
        self._n = 0

    def add(self, name, spec: nn.MLPSpec):
        self._specs[name] = spec
        self._slices[name] = slice(self._n, self._n + spec.n_params)
        self._n += spec.n_params

    @property
    def n_params(self):
        return self._n

    def init(self, rng):
        params = np.empty(self._n)
        for name, spec in self._specs.items():
            params[self._slices[name]] = nn.init_params(spec, rng)
        return params

    def spec(self, name):
        return self._specs[name]

    def view(self, params, name):
        return params[self._slices[name]]

    def scatter(self, grads_dict):
        out = np.zeros(self._n)
        for name, g in grads_dict.items():
            out[self._slices[name]] += g
        return out


class _VelocityBase:
    """Shared conveniences over forward/backward."""

    def velocity_batch(self, X, t, C):
        return self.forward(np.asarray(X, dtype=np.float64), t,
                            np.asarray(C, dtype=np.float64))[0]

    def velocity(self, x, t, cond):
        v = self.velocity_batch(np.asarray(x, dtype=np.float64)[None, :], t,
                                np.asarray(cond, dtype=np.float64)[None, :])
        return v[0]


# ---------------------------------------------------------------------------
# plain MLP on flattened features

class MLPVelocity(_VelocityBase):
    def __init__(self, d_x, d_cond, hidden=(64, 64, 64), activation="silu",
                 x_scale=1.0, cond_scale=1.0, v_scale=1.0, seed=0):
        self.d_x, self.d_cond = int(d_x), int(d_cond)
        self.x_scale, self.cond_scale = float(x_scale), float(cond_scale)
        self.v_scale = float(v_scale)
        d_in = self.d_x + self.d_cond + TEMB_DIM
        self.bank = _ParamBank()
        self.bank.add("net", nn.MLPSpec((d_in, *hidden, self.d_x), activation))
        self.params = self.bank.init(np.random.default_rng(seed))

    def forward(self, X, t, C):
        B = X.shape[0]
        inp = np.concatenate([X / self.x_scale, C / self.cond_scale,
                              time_embedding(t, B)], axis=1)
        p = self.bank.view(self.params, "net")
        out, cache = nn.mlp_forward(self.bank.spec("net"), p, inp)
        return out * self.v_scale, cache

    def backward(self, cache, U):
        p = self.bank.view(self.params, "net")
        dnet, _ = nn.mlp_backward(self.bank.spec("net"), p, cache,
                                  U * self.v_scale)
        return self.bank.scatter({"net": dnet})


# ---------------------------------------------------------------------------
# permutation-equivariant set network

class SetNetVelocity(_VelocityBase):
    """v_i = rho(phi(z_i) + sum_{j != i} psi(z_i, z_j)).

    z_i stacks the element's flow state, its conditioning feature, and the
    time embedding; the symmetric aggregation makes the map permutation
    equivariant by construction.
    """

    def __init__(self, n_elem, d_node_x=1, d_node_cond=1, hidden=64,
                 activation="silu", x_scale=1.0, cond_scale=1.0, v_scale=1.0,
                 seed=0):
        self.n = int(n_elem)
        self.dx, self.dc = int(d_node_x), int(d_node_cond)
        self.x_scale, self.cond_scale = float(x_scale), float(cond_scale)
        self.v_scale = float(v_scale)
        fz = self.dx + self.dc + TEMB_DIM
        h = int(hidden)
        self.bank = _ParamBank()
        self.bank.add("phi", nn.MLPSpec((fz, h, h), activation))
        self.bank.add("psi", nn.MLPSpec((2 * fz, h, h), activation))
        self.bank.add("rho", nn.MLPSpec((h, h, self.dx), activation))
        pairs = [(i, j) for i in range(self.n) for j in range(self.n) if i != j]
        self._pi = np.array([p[0] for p in pairs])
        self._pj = np.array([p[1] for p in pairs])
        self.params = self.bank.init(np.random.default_rng(seed))

    def _features(self, X, t, C):
        B = X.shape[0]
        Z = np.concatenate([
            (X / self.x_scale).reshape(B, self.n, self.dx),
            (C / self.cond_scale).reshape(B, self.n, self.dc),
            np.broadcast_to(time_embedding(t, B)[:, None, :],
                            (B, self.n, TEMB_DIM)),
        ], axis=2)
        return Z

    def forward(self, X, t, C):
        B = X.shape[0]
        Z = self._features(X, t, C)
        fz = Z.shape[2]
        p_phi = self.bank.view(self.params, "phi")
        p_psi = self.bank.view(self.params, "psi")
        p_rho = self.bank.view(self.params, "rho")
        H, c_phi = nn.mlp_forward(self.bank.spec("phi"), p_phi,
                                  Z.reshape(B * self.n, fz))
        h = H.shape[1]
        P = np.concatenate([Z[:, self._pi, :], Z[:, self._pj, :]], axis=2)
        m = len(self._pi)
        E, c_psi = nn.mlp_forward(self.bank.spec("psi"), p_psi,
                                  P.reshape(B * m, 2 * fz))
        S = np.zeros((B, self.n, h))
        np.add.at(S, (slice(None), self._pi), E.reshape(B, m, h))
        A = H.reshape(B, self.n, h) + S
        out, c_rho = nn.mlp_forward(self.bank.spec("rho"), p_rho,
                                    A.reshape(B * self.n, h))
        V = out.reshape(B, self.n * self.dx) * self.v_scale
        return V, (B, h, c_phi, c_psi, c_rho)

    def backward(self, cache, U):
        B, h, c_phi, c_psi, c_rho = cache
        p_phi = self.bank.view(self.params, "phi")
        p_psi = self.bank.view(self.params, "psi")
        p_rho = self.bank.view(self.params, "rho")
        dout = (U * self.v_scale).reshape(B * self.n, self.dx)
        d_rho, dA = nn.mlp_backward(self.bank.spec("rho"), p_rho, c_rho, dout)
        dA = dA.reshape(B, self.n, h)
        d_phi, _ = nn.mlp_backward(self.bank.spec("phi"), p_phi, c_phi,
                                   dA.reshape(B * self.n, h))
        m = len(self._pi)
        dE = dA[:, self._pi, :].reshape(B * m, h)
        d_psi, _ = nn.mlp_backward(self.bank.spec("psi"), p_psi, c_psi, dE)
        return self.bank.scatter({"phi": d_phi, "psi": d_psi, "rho": d_rho})


# ---------------------------------------------------------------------------
# message-passing graph network

class GraphNetVelocity(_VelocityBase):
    """Three rounds of message passing over a fixed edge set.

    Node features start from the flow state (optionally centered on the
    conditioning value), the conditioning, and the time embedding.
    """

    def __init__(self, n_nodes, edges, hidden=64, rounds=3, activation="silu",
                 center_on_cond=True, x_scale=1.0, cond_scale=1.0,
                 v_scale=1.0, seed=0):
        self.n = int(n_nodes)
        self.rounds = int(rounds)
        self.center_on_cond = bool(center_on_cond)
        self.x_scale, self.cond_scale = float(x_scale), float(cond_scale)
        self.v_scale = float(v_scale)
        # directed edges, both directions of each undirected pair
        dir_edges = sorted(set([(i, j) for i, j in edges]
                               + [(j, i) for i, j in edges]))
        self._ei = np.array([e[0] for e in dir_edges])
        self._ej = np.array([e[1] for e in dir_edges])
        fz = 2 + TEMB_DIM
        hdim = int(hidden)
        self.h = hdim
        self.bank = _ParamBank()
        self.bank.add("enc", nn.MLPSpec((fz, hdim, hdim), activation))
        for r in range(self.rounds):
            self.bank.add(f"edge{r}", nn.MLPSpec((2 * hdim, hdim, hdim),
                                                 activation))
            self.bank.add(f"node{r}", nn.MLPSpec((2 * hdim, hdim, hdim),
                                                 activation))
        self.bank.add("dec", nn.MLPSpec((hdim, hdim, 1), activation))
        self.params = self.bank.init(np.random.default_rng(seed))

    def forward(self, X, t, C):
        B = X.shape[0]
        Xn = (X - C) / self.x_scale if self.center_on_cond else X / self.x_scale
        Z = np.concatenate([
            Xn.reshape(B, self.n, 1),
            (C / self.cond_scale).reshape(B, self.n, 1),
            np.broadcast_to(time_embedding(t, B)[:, None, :],
                            (B, self.n, TEMB_DIM)),
        ], axis=2)
        h = self.h
        caches = {}
        H, caches["enc"] = nn.mlp_forward(
            self.bank.spec("enc"), self.bank.view(self.params, "enc"),
            Z.reshape(B * self.n, -1))
        H = H.reshape(B, self.n, h)
        m = len(self._ei)
        for r in range(self.rounds):
            P = np.concatenate([H[:, self._ei, :], H[:, self._ej, :]], axis=2)
            E, caches[f"edge{r}"] = nn.mlp_forward(
                self.bank.spec(f"edge{r}"),
                self.bank.view(self.params, f"edge{r}"),
                P.reshape(B * m, 2 * h))
            M = np.zeros((B, self.n, h))
            np.add.at(M, (slice(None), self._ei), E.reshape(B, m, h))
            NI = np.concatenate([H, M], axis=2)
            H_new, caches[f"node{r}"] = nn.mlp_forward(
                self.bank.spec(f"node{r}"),
                self.bank.view(self.params, f"node{r}"),
                NI.reshape(B * self.n, 2 * h))
            H = H_new.reshape(B, self.n, h)
        out, caches["dec"] = nn.mlp_forward(
            self.bank.spec("dec"), self.bank.view(self.params, "dec"),
            H.reshape(B * self.n, h))
        V = out.reshape(B, self.n) * self.v_scale
        return V, (B, caches)

    def backward(self, cache, U):
        B, caches = cache
        h = self.h
        m = len(self._ei)
        grads = {}
        dout = (U * self.v_scale).reshape(B * self.n, 1)
        grads["dec"], dH = nn.mlp_backward(
            self.bank.spec("dec"), self.bank.view(self.params, "dec"),
            caches["dec"], dout)
        dH = dH.reshape(B, self.n, h)
        for r in range(self.rounds - 1, -1, -1):
            g_node, dNI = nn.mlp_backward(
                self.bank.spec(f"node{r}"),
                self.bank.view(self.params, f"node{r}"),
                caches[f"node{r}"], dH.reshape(B * self.n, h))
            grads[f"node{r}"] = g_node
            dNI = dNI.reshape(B, self.n, 2 * h)
            dH_prev = dNI[:, :, :h].copy()
            dM = dNI[:, :, h:]
            dE = dM[:, self._ei, :].reshape(B * m, h)
            g_edge, dP = nn.mlp_backward(
                self.bank.spec(f"edge{r}"),
                self.bank.view(self.params, f"edge{r}"),
                caches[f"edge{r}"], dE)
            grads[f"edge{r}"] = g_edge
            dP = dP.reshape(B, m, 2 * h)
            np.add.at(dH_prev, (slice(None), self._ei), dP[:, :, :h])
            np.add.at(dH_prev, (slice(None), self._ej), dP[:, :, h:])
            dH = dH_prev
        grads["enc"], _ = nn.mlp_backward(
            self.bank.spec("enc"), self.bank.view(self.params, "enc"),
            caches["enc"], dH.reshape(B * self.n, h))
        return self.bank.scatter(grads)


# ---------------------------------------------------------------------------
# circular 1D convolutions over (time, space) fields

class _ConvLayer:
    """2D convolution, zero padding along time, circular along space."""

    def __init__(self, c_in, c_out, kt=3, kx=5):
        self.c_in, self.c_out = c_in, c_out
        self.kt, self.kx = kt, kx
        self.n_params = c_out * c_in * kt * kx + c_out

    def init(self, rng):
        fan_in = self.c_in * self.kt * self.kx
        bound = np.sqrt(6.0 / (fan_in + self.c_out))
        W = rng.uniform(-bound, bound,
                        size=(self.c_out, self.c_in * self.kt * self.kx))
        return np.concatenate([W.ravel(), np.zeros(self.c_out)])

    def _split(self, p):
        nw = self.c_out * self.c_in * self.kt * self.kx
        return (p[:nw].reshape(self.c_out, self.c_in * self.kt * self.kx),
                p[nw:])

    def _wall(self, Wm, C):
        # rows indexed by (out channel, dt, dx), columns by input channel
        return np.ascontiguousarray(
            Wm.reshape(self.c_out, C, self.kt, self.kx)
            .transpose(0, 2, 3, 1).reshape(-1, C))

    def _pad(self, X):
        # zero padding along time, circular along space, channel-leading
        B, C, T, W = X.shape
        pt, px = self.kt // 2, self.kx // 2
        Xq = np.zeros((C, B, T + 2 * pt, W + 2 * px))
        Xq[:, :, pt:pt + T, px:px + W] = X.transpose(1, 0, 2, 3)
        if px:
            Xq[:, :, :, :px] = Xq[:, :, :, W:W + px]
            Xq[:, :, :, px + W:] = Xq[:, :, :, px:2 * px]
        return Xq

    def forward(self, p, X):
        # one GEMM per layer; kernel offsets become strided view sums
        B, C, T, W = X.shape
        pt, px = self.kt // 2, self.kx // 2
        Xq = self._pad(X)
        Wm, b = self._split(p)
        Xf = Xq.reshape(C, -1)
        R = (self._wall(Wm, C) @ Xf).reshape(
            self.c_out, self.kt, self.kx, B, T + 2 * pt, W + 2 * px)
        Y = np.empty((self.c_out, B, T, W))
        Y[:] = b[:, None, None, None]
        for dt in range(self.kt):
            for dx in range(self.kx):
                Y += R[:, dt, dx, :, dt:dt + T, dx:dx + W]
        return Y.transpose(1, 0, 2, 3), (Xf, (B, C, T, W))

    def backward(self, p, cache, dY):
        Xf, (B, C, T, W) = cache
        pt, px = self.kt // 2, self.kx // 2
        Tp, Wp = T + 2 * pt, W + 2 * px
        Wm, _ = self._split(p)
        dYq = dY.transpose(1, 0, 2, 3)
        db = dY.sum(axis=(0, 2, 3))
        dR = np.zeros((self.c_out, self.kt, self.kx, B, Tp, Wp))
        for dt in range(self.kt):
            for dx in range(self.kx):
                dR[:, dt, dx, :, dt:dt + T, dx:dx + W] = dYq
        dRf = dR.reshape(-1, B * Tp * Wp)
        dWall = dRf @ Xf.T
        dWk = dWall.reshape(self.c_out, self.kt, self.kx, C) \
            .transpose(0, 3, 1, 2)
        dXq = (self._wall(Wm, C).T @ dRf).reshape(C, B, Tp, Wp)
        if px:
            dXq[:, :, :, W:W + px] += dXq[:, :, :, :px]
            dXq[:, :, :, px:2 * px] += dXq[:, :, :, px + W:]
        dX = dXq[:, :, pt:pt + T, px:px + W].transpose(1, 0, 2, 3)
        return np.concatenate([dWk.reshape(self.c_out, -1).ravel(), db]), dX


class CircConvVelocity(_VelocityBase):
    """Conv stack on (time, space) trajectories; exactly equivariant to
    spatial circular shifts. Conditioning scalars and the time embedding
    enter as constant channels, and a per-row spatial mean enters as a
    global-context channel: the receptive field of a small conv stack
    cannot see the whole ring, but system-wide symmetry breaking (which
    sign the field commits to) is decided by exactly that global signal."""

    def __init__(self, t_dim, x_dim, d_cond=2, channels=12, kt=3, kx=5,
                 n_layers=3, activation="silu", x_scale=1.0, v_scale=1.0,
                 cond_scale=None, seed=0):
        self.T, self.W = int(t_dim), int(x_dim)
        self.d_cond = int(d_cond)
        self.x_scale, self.v_scale = float(x_scale), float(v_scale)
        self.cond_scale = (np.ones(d_cond) if cond_scale is None
                           else np.asarray(cond_scale, dtype=np.float64))
        c_in = 2 + d_cond + TEMB_DIM
        self.act, self.dact = nn._ACTIVATIONS[activation]
        self.layers = []
        c = c_in
        for li in range(n_layers):
            c_out = 1 if li == n_layers - 1 else channels
            self.layers.append(_ConvLayer(c, c_out, kt, kx))
            c = c_out
        self._slices = []
        off = 0
        for layer in self.layers:
            self._slices.append(slice(off, off + layer.n_params))
            off += layer.n_params
        rng = np.random.default_rng(seed)
        self.params = np.concatenate([l.init(rng) for l in self.layers])

    def _stack_input(self, X, t, C):
        B = X.shape[0]
        field = X.reshape(B, 1, self.T, self.W) / self.x_scale
        # shift-invariant global context per time row; the sqrt keeps the
        # magnitude of white-noise fields, tanh bounds committed states
        gctx = np.tanh(field.mean(axis=3, keepdims=True) * np.sqrt(self.W))
        gctx_ch = np.broadcast_to(gctx, (B, 1, self.T, self.W))
        Cn = C / self.cond_scale[None, :]
        cond_ch = np.broadcast_to(Cn[:, :, None, None],
                                  (B, self.d_cond, self.T, self.W))
        te = time_embedding(t, B)
        te_ch = np.broadcast_to(te[:, :, None, None],
                                (B, TEMB_DIM, self.T, self.W))
        return np.concatenate([field, gctx_ch, cond_ch, te_ch], axis=1)

    def forward(self, X, t, C):
        B = X.shape[0]
        h = self._stack_input(X, t, C)
        caches = []
        n = len(self.layers)
        for li, layer in enumerate(self.layers):
            p = self.params[self._slices[li]]
            z, cache = layer.forward(p, h)
            if li < n - 1:
                caches.append((cache, z))
                h = self.act(z)
            else:
                caches.append((cache, None))
                h = z
        return h.reshape(B, self.T * self.W) * self.v_scale, caches

    def backward(self, caches, U):
        B = U.shape[0]
        dh = (U * self.v_scale).reshape(B, 1, self.T, self.W)
        grads = np.zeros_like(self.params)
        for li in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[li]
            cache, _ = caches[li]
            p = self.params[self._slices[li]]
            dp, dh = layer.backward(p, cache, dh)
            grads[self._slices[li]] = dp
            if li > 0:
                _, z_prev = caches[li - 1]
                dh = dh * self.dact(z_prev, self.act(z_prev))
        return grads


# ---------------------------------------------------------------------------
# wrappers

class MaskedVelocity(_VelocityBase):
    """Zero the velocity on padded (inactive) coordinates.

    The mask per sample lives in a slice of the conditioning vector and is
    tiled across time slices of the flattened trajectory.
    """

    def __init__(self, base, mask_slice, t_dim):
        self.base = base
        self.mask_slice = mask_slice
        self.t_dim = int(t_dim)

    @property
    def params(self):
        return self.base.params

    @params.setter
    def params(self, value):
        self.base.params = value

    def _mask(self, C):
        m = C[:, self.mask_slice]
        return np.tile(m, (1, self.t_dim))

    def forward(self, X, t, C):
        M = self._mask(np.asarray(C, dtype=np.float64))
        V, cache = self.base.forward(X, t, C)
        return V * M, (cache, M)

    def backward(self, cache, U):
        base_cache, M = cache
        return self.base.backward(base_cache, U * M)


def sign_flip_wrap(base):
    """Average over {identity, global sign flip of the sample} so that
    v(-x, t, c) = -v(x, t, c) exactly; conditioning is left untouched."""
    group = SymmetryGroup([GroupAction("identity"), GroupAction("sign_flip")],
                          check_closure=False, name="sign_flip_pair")
    return equivariantize(base, group)


# ---------------------------------------------------------------------------
# deterministic baseline

class DeterministicBaseline:
    """Plain MSE regressor from conditioning to output."""

    def __init__(self, d_in, d_out, hidden=(32, 32), activation="silu",
                 in_scale=1.0, out_scale=1.0, seed=0):
        self.spec = nn.MLPSpec((int(d_in), *hidden, int(d_out)), activation)
        self.in_scale, self.out_scale = float(in_scale), float(out_scale)
        self.params = nn.init_params(self.spec, np.random.default_rng(seed))

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Y, _ = nn.mlp_forward(self.spec, self.params, X / self.in_scale)
        return Y * self.out_scale

    def fit(self, X, Y, epochs=200, batch_size=64, lr=1e-3, seed=0):
        X = np.asarray(X, dtype=np.float64) / self.in_scale
        Y = np.asarray(Y, dtype=np.float64) / self.out_scale
        rng = np.random.default_rng(seed)
        state = nn.adam_init(self.params.size, lr=lr)
        params = self.params
        history = []
        for _ in range(epochs):
            order = rng.permutation(len(X))
            losses = []
            for lo in range(0, len(X), batch_size):
                idx = order[lo:lo + batch_size]
                out, cache = nn.mlp_forward(self.spec, params, X[idx])
                resid = out - Y[idx]
                loss = float(np.mean(np.sum(resid ** 2, axis=1)))
                grads, _ = nn.mlp_backward(self.spec, params, cache,
                                           2.0 * resid / len(idx))
                params, state = nn.adam_step(params, grads, state)
                losses.append(loss)
            history.append(float(np.mean(losses)))
        self.params = params
        return history


# ---------------------------------------------------------------------------
# per-system wiring

SYSTEM_IDS = ("two_deltas", "coin_flip", "three_roads", "four_node",
              "beam", "allen_cahn")

FOUR_NODE_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0))

# defaults chosen so every system trains in minutes on CPU
DEFAULT_ARCH = {
    "two_deltas": {"hidden": [64, 64, 64]},
    "coin_flip": {"hidden": [64, 64], "scale": 10.0},
    "three_roads": {"hidden": 64, "scale": 5.0},
    "four_node": {"hidden": 64, "x_scale": 5.0, "cond_scale": 50.0},
    "beam": {"hidden": [128, 128], "scale": 2.0, "t_dim": 20, "n_pad": 11,
             "sign_equivariant": True},
    "allen_cahn": {"channels": 8, "kt": 3, "kx": 5, "n_layers": 3,
                   "t_dim": 11, "x_dim": 200, "x_scale": 0.2,
                   "sign_equivariant": True},
}


def build_model(system_id, arch=None, seed=0):
    """Default velocity model for a system, correct equivariance included."""
    if system_id not in SYSTEM_IDS:
        raise ValueError(f"unknown system {system_id!r}")
    cfg = dict(DEFAULT_ARCH[system_id])
    cfg.update(arch or {})
    if system_id == "two_deltas":
        return MLPVelocity(1, 1, hidden=tuple(cfg["hidden"]), seed=seed)
    if system_id == "coin_flip":
        s = cfg["scale"]
        return MLPVelocity(1, 1, hidden=tuple(cfg["hidden"]), x_scale=s,
                           cond_scale=s, v_scale=s, seed=seed)
    if system_id == "three_roads":
        s = cfg["scale"]
        return SetNetVelocity(2, hidden=cfg["hidden"], x_scale=s,
                              cond_scale=s, v_scale=s, seed=seed)
    if system_id == "four_node":
        return GraphNetVelocity(4, FOUR_NODE_EDGES, hidden=cfg["hidden"],
                                center_on_cond=True,
                                x_scale=cfg["x_scale"],
                                cond_scale=cfg["cond_scale"],
                                v_scale=cfg["x_scale"], seed=seed)
    if system_id == "beam":
        t_dim, n_pad = cfg["t_dim"], cfg["n_pad"]
        s = cfg["scale"]
        d_x = t_dim * n_pad
        d_cond = 3 * n_pad + n_pad + 1  # L, C, K, mask, total length
        base = MLPVelocity(d_x, d_cond, hidden=tuple(cfg["hidden"]),
                           x_scale=s, cond_scale=2.0, v_scale=s, seed=seed)
        if cfg["sign_equivariant"]:
            base = sign_flip_wrap(base)
        mask_slice = slice(3 * n_pad, 4 * n_pad)
        return MaskedVelocity(base, mask_slice, t_dim)
    # allen_cahn
    base = CircConvVelocity(cfg["t_dim"], cfg["x_dim"], d_cond=2,
                            channels=cfg["channels"], kt=cfg["kt"],
                            kx=cfg["kx"], n_layers=cfg["n_layers"],
                            x_scale=cfg["x_scale"],
                            cond_scale=[1.0, 5.0], seed=seed)
    if cfg["sign_equivariant"]:
        return sign_flip_wrap(base)
    return base

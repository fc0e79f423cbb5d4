import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifurcflow import nn


def rand_spec(rng):
    depth = rng.integers(2, 5)
    sizes = tuple(int(rng.integers(1, 7)) for _ in range(depth))
    act = ["tanh", "relu", "silu"][rng.integers(0, 3)]
    return nn.MLPSpec(sizes, act)


class TestMLPSpec:
    def test_param_count(self):
        spec = nn.MLPSpec((3, 4, 2))
        assert spec.n_params == (3 * 4 + 4) + (4 * 2 + 2)

    def test_too_short(self):
        with pytest.raises(nn.ShapeError):
            nn.MLPSpec((3,))

    def test_zero_width(self):
        with pytest.raises(nn.ShapeError):
            nn.MLPSpec((3, 0, 1))

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            nn.MLPSpec((2, 2), "softplus")

    def test_slices_cover_params(self):
        spec = nn.MLPSpec((5, 3, 3, 2))
        seen = 0
        for wsl, bsl, (dout, din) in spec.param_slices():
            assert wsl.stop - wsl.start == dout * din
            assert bsl.stop - bsl.start == dout
            assert wsl.start == seen
            seen = bsl.stop
        assert seen == spec.n_params


class TestApply:
    def test_zero_params_zero_output(self):
        spec = nn.MLPSpec((3, 5, 2))
        out = nn.mlp_apply(spec, np.zeros(spec.n_params), np.array([1.0, 2, 3]))
        assert np.array_equal(out, np.zeros(2))

    def test_single_linear_layer(self):
        spec = nn.MLPSpec((2, 1))
        params = np.array([1.0, 1.0, 0.0])  # W=[1,1], b=0
        out = nn.mlp_apply(spec, params, np.array([3.0, 4.0]))
        assert out == pytest.approx([7.0])

    def test_matches_naive_loop_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            spec = rand_spec(rng)
            params = rng.normal(size=spec.n_params)
            x = rng.normal(size=spec.layer_sizes[0])
            # independent oracle: per-element loops
            h = x.astype(float)
            layers = list(spec.param_slices())
            for li, (wsl, bsl, (dout, din)) in enumerate(layers):
                W = params[wsl].reshape(dout, din)
                z = np.array([
                    sum(W[o, i] * h[i] for i in range(din)) + params[bsl][o]
                    for o in range(dout)])
                if li < len(layers) - 1:
                    act, _ = nn._ACTIVATIONS[spec.activation]
                    z = act(z)
                h = z
            got = nn.mlp_apply(spec, params, x)
            assert np.allclose(got, h, atol=1e-12)

    def test_shape_mismatch(self):
        spec = nn.MLPSpec((2, 1))
        with pytest.raises(nn.ShapeError):
            nn.mlp_apply(spec, np.zeros(spec.n_params), np.zeros(3))
        with pytest.raises(nn.ShapeError):
            nn.mlp_apply(spec, np.zeros(spec.n_params + 1), np.zeros(2))

    def test_homogeneous_linear_layer(self):
        spec = nn.MLPSpec((3, 2))
        rng = np.random.default_rng(1)
        params = rng.normal(size=spec.n_params)
        params[-2:] = 0.0  # zero bias
        x = rng.normal(size=3)
        assert np.allclose(nn.mlp_apply(spec, 3.5 * params, x),
                           3.5 * nn.mlp_apply(spec, params, x))


class TestGradient:
    def test_zero_upstream(self):
        spec = nn.MLPSpec((2, 3, 1))
        rng = np.random.default_rng(2)
        g = nn.mlp_gradient(spec, rng.normal(size=spec.n_params),
                            np.array([1.0, 2.0]), np.zeros(1))
        assert np.array_equal(g, np.zeros(spec.n_params))

    def test_linear_layer_closed_form(self):
        spec = nn.MLPSpec((2, 1))
        g = nn.mlp_gradient(spec, np.zeros(3), np.array([3.0, 4.0]),
                            np.array([1.0]))
        assert g == pytest.approx([3.0, 4.0, 1.0])

    def test_finite_differences_100_random_triples(self):
        rng = np.random.default_rng(3)
        h = 1e-5
        worst = 0.0
        for _ in range(100):
            spec = rand_spec(rng)
            params = rng.normal(size=spec.n_params)
            x = rng.normal(size=spec.layer_sizes[0])
            up = rng.normal(size=spec.layer_sizes[-1])
            g = nn.mlp_gradient(spec, params, x, up)
            d = rng.normal(size=spec.n_params)
            d /= np.linalg.norm(d)
            fp = float(up @ nn.mlp_apply(spec, params + h * d, x))
            fm = float(up @ nn.mlp_apply(spec, params - h * d, x))
            fd = (fp - fm) / (2 * h)
            an = float(g @ d)
            rel = abs(fd - an) / max(1.0, abs(fd))
            worst = max(worst, rel)
        assert worst < 1e-4

    def test_batched_backward_is_sum_of_per_sample(self):
        spec = nn.MLPSpec((3, 4, 2), "tanh")
        rng = np.random.default_rng(4)
        params = rng.normal(size=spec.n_params)
        X = rng.normal(size=(5, 3))
        U = rng.normal(size=(5, 2))
        _, cache = nn.mlp_forward(spec, params, X)
        dsum, _ = nn.mlp_backward(spec, params, cache, U)
        per = sum(nn.mlp_gradient(spec, params, X[i], U[i]) for i in range(5))
        assert np.allclose(dsum, per, atol=1e-12)


class TestAdam:
    def test_zero_grad_fresh_state(self):
        p = np.array([1.0, -2.0])
        st0 = nn.adam_init(2, lr=0.1)
        p1, st1 = nn.adam_step(p, np.zeros(2), st0)
        assert np.array_equal(p1, p)
        assert st1.k == 1

    def test_first_step_magnitude_is_lr(self):
        p = np.zeros(1)
        st0 = nn.adam_init(1, lr=0.05)
        p1, _ = nn.adam_step(p, np.array([3.7]), st0)
        # bias-corrected ratio -> 1 on step one
        assert abs(p1[0]) == pytest.approx(0.05, rel=1e-6)

    def test_three_step_hand_recurrence(self):
        g = 2.0
        lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
        p = 0.5
        m = v = 0.0
        expect = p
        for k in range(1, 4):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            mh = m / (1 - b1 ** k)
            vh = v / (1 - b2 ** k)
            expect -= lr * mh / (np.sqrt(vh) + eps)
        params = np.array([0.5])
        state = nn.adam_init(1, lr=lr)
        for _ in range(3):
            params, state = nn.adam_step(params, np.array([g]), state)
        assert params[0] == pytest.approx(expect, abs=1e-12)

    def test_lr_zero_is_identity(self):
        rng = np.random.default_rng(5)
        p = rng.normal(size=4)
        state = nn.adam_init(4, lr=0.0)
        p1, _ = nn.adam_step(p, rng.normal(size=4), state)
        assert np.array_equal(p1, p)

    def test_nonfinite_grad_rejected(self):
        state = nn.adam_init(2)
        with pytest.raises(nn.NonFiniteError):
            nn.adam_step(np.zeros(2), np.array([1.0, np.nan]), state)


class TestCheckpoint:
    def test_bit_exact_roundtrip(self, tmp_path):
        rng = np.random.default_rng(6)
        arrays = {"params": rng.normal(size=37) * 1e-7,
                  "extra": rng.normal(size=(2, 3))}
        path = tmp_path / "ckpt.json"
        nn.save_checkpoint(path, arrays, {"note": "x"}, seed=9)
        back, meta, seed = nn.load_checkpoint(path)
        assert seed == 9 and meta == {"note": "x"}
        for k in arrays:
            assert back[k].shape == np.asarray(arrays[k]).shape
            assert np.array_equal(back[k], np.asarray(arrays[k], dtype=float))

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"format": "something-else"}))
        with pytest.raises(ValueError):
            nn.load_checkpoint(path)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=8),
       st.floats(0.1, 5.0))
def test_init_params_within_glorot_bounds(xs, scale):
    sizes = tuple(max(1, int(abs(x)) + 1) for x in xs[:3]) + (2,)
    spec = nn.MLPSpec(sizes)
    params = nn.init_params(spec, np.random.default_rng(0))
    for wsl, bsl, (dout, din) in spec.param_slices():
        bound = np.sqrt(6.0 / (din + dout))
        assert np.all(np.abs(params[wsl]) <= bound)
        assert np.all(params[bsl] == 0.0)

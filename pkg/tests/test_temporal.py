import mpmath
import numpy as np
import pytest

from grouptkg.tensor import ShapeError, Tensor, tsum
from grouptkg.temporal import (DecayParams, GruParams, LastActiveTracker, decay_rate,
                               decayed_gru_step, encode_sequence)

from helpers import check_grads

T = Tensor


def decay(w, b):
    return DecayParams(T([float(w)], requires_grad=True), T([float(b)], requires_grad=True))


def gru(d, rng=None, scale=0.5):
    def mk(*shape):
        data = np.zeros(shape) if rng is None else scale * rng.normal(size=shape)
        return T(data, requires_grad=True)
    return GruParams(mk(2 * d, d), mk(d), mk(2 * d, d), mk(d), mk(2 * d, d), mk(d))


class TestDecay:
    def test_zero_params(self):
        assert decay_rate(3, decay(0, 0)).data.item() == 0.5

    def test_high_precision_value(self):
        ref = 1 / (1 + mpmath.exp(2))
        with mpmath.workdps(50):
            ref = float(1 / (1 + mpmath.exp(mpmath.mpf(2))))
        got = decay_rate(2, decay(1, 0)).data.item()
        assert abs(got - ref) < 1e-10
        assert abs(got - 0.11920) < 1e-5

    def test_monotone_and_bounded(self):
        p = decay(0.7, -0.3)
        g = decay_rate(np.arange(20), p).data[:, 0]
        assert (np.diff(g) <= 0).all()
        assert ((g > 0) & (g <= 0.5)).all()
        assert decay_rate(5, decay(1, 0)).data.item() < decay_rate(1, decay(1, 0)).data.item()

    def test_negative_elapsed_rejected(self):
        with pytest.raises(ValueError):
            decay_rate(-1, decay(1, 0))


class TestStep:
    def test_zero_weights(self, rng):
        h = rng.normal(size=5)
        out = decayed_gru_step(T(rng.normal(size=5)), T(h), 0.3, gru(5)).data
        assert np.abs(out - 0.5 * 0.3 * h).max() < 1e-10

    def test_zero_state(self, rng):
        p = gru(3, rng)
        x = rng.normal(size=3)
        out = decayed_gru_step(T(x), T(np.zeros(3)), 0.4, p).data
        xh = np.concatenate([x, np.zeros(3)])
        z = 1 / (1 + np.exp(-(xh @ p.W_update.data + p.b_update.data)))
        np.testing.assert_allclose(out, (1 - z) * np.tanh(xh @ p.W_new.data + p.b_new.data))

    def test_bounded_by_convex_mix(self, rng):
        p = gru(4, rng, scale=2.0)
        for _ in range(20):
            h = rng.normal(size=4) * 3
            gamma = rng.uniform(0.01, 0.5)
            out = decayed_gru_step(T(rng.normal(size=4)), T(h), gamma, p).data
            assert (np.abs(out) <= np.maximum(np.abs(gamma * h), 1.0) + 1e-12).all()

    def test_batched_matches_rows(self, rng):
        p = gru(3, rng)
        X, H = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        gam = rng.uniform(0.1, 0.5, size=(4, 1))
        batch = decayed_gru_step(T(X), T(H), T(gam), p).data
        for k in range(4):
            row = decayed_gru_step(T(X[k]), T(H[k]), float(gam[k, 0]), p).data
            np.testing.assert_allclose(batch[k], row, atol=1e-14)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            decayed_gru_step(T(np.ones(3)), T(np.ones(4)), 0.5, gru(3))


class TestTracker:
    def test_always_active(self):
        tr = LastActiveTracker(2, 5)
        seen = []
        for t in range(5, 9):
            seen.append(tr.elapsed(t).tolist())
            tr.update(t, [True, True])
        assert seen == [[0, 0], [1, 1], [1, 1], [1, 1]]

    def test_gap(self):
        tr = LastActiveTracker(1, 0)
        tr.update(0, [True])
        assert tr.elapsed(3).tolist() == [3]


class TestSequence:
    def test_length_one_ignores_gamma(self, rng):
        p = gru(3, rng)
        x = rng.normal(size=3)
        for w in (0.0, 5.0):
            out = encode_sequence([T(x)], np.array([[True]]), decay(w, 1), p).data
            np.testing.assert_allclose(out, decayed_gru_step(T(x), T(np.zeros(3)), 0.5, p).data)

    def test_activity_changes_result(self, rng):
        p = gru(3, rng)
        X = [T(rng.normal(size=3)) for _ in range(4)]
        dp = decay(1.0, 0.0)
        a = encode_sequence(X, np.array([[1], [1], [1], [1]], dtype=bool), dp, p).data
        b = encode_sequence(X, np.array([[1], [0], [0], [1]], dtype=bool), dp, p).data
        assert not np.allclose(a, b)

    def test_matches_manual_recurrence(self, rng):
        p = gru(2, rng)
        dp = decay(0.8, 0.1)
        X = rng.normal(size=(3, 5, 2))
        act = rng.random((3, 5)) < 0.5
        steps = [4, 5, 7]
        batch = encode_sequence([T(x) for x in X], act, dp, p, timesteps=steps).data
        for u in range(5):
            h, last = np.zeros(2), steps[0]
            for k, t in enumerate(steps):
                gamma = decay_rate(t - last, dp).data.item()
                h = decayed_gru_step(T(X[k, u]), T(h), gamma, p).data
                if act[k, u]:
                    last = t
            np.testing.assert_allclose(batch[u], h, atol=1e-13)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            encode_sequence([], np.zeros((0, 1), dtype=bool), decay(1, 0), gru(2))

    def test_deterministic(self, rng):
        p = gru(3, rng)
        X = [T(rng.normal(size=(2, 3))) for _ in range(3)]
        act = np.array([[1, 0], [0, 1], [1, 1]], dtype=bool)
        a = encode_sequence(X, act, decay(1, 0), p).data
        b = encode_sequence(X, act, decay(1, 0), p).data
        np.testing.assert_array_equal(a, b)


def test_sequence_gradients(rng):
    p = gru(2, rng)
    dp = decay(0.6, 0.2)
    X = [T(rng.normal(size=(3, 2)), requires_grad=True) for _ in range(3)]
    act = np.array([[1, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=bool)
    check_grads(lambda: tsum(encode_sequence(X, act, dp, p) * 1.3),
                [*X, *dp.tensors().values(), *p.tensors().values()])

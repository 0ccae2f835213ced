import numpy as np
import pytest

from grouptkg.decoder import DecoderParams, bce_loss, conv_transe_features, conv_transe_score
from grouptkg.tensor import ShapeError, Tensor, reshape

from helpers import check_grads

T = Tensor


def params(d, C=3, K=3, rng=None, scale=0.5):
    def mk(*shape):
        data = np.zeros(shape) if rng is None else scale * rng.normal(size=shape)
        return T(data, requires_grad=True)
    return DecoderParams(mk(C, 2, K), mk(C), mk(C * d, d), mk(d))


def test_zero_type_matrix(rng):
    p = params(4, rng=rng)
    out = conv_transe_score(T(rng.normal(size=4)), T(rng.normal(size=4)), T(np.zeros((5, 4))), p)
    np.testing.assert_array_equal(out.data, 0.5)


def test_zero_weights(rng):
    out = conv_transe_score(T(rng.normal(size=4)), T(rng.normal(size=4)),
                            T(rng.normal(size=(5, 4))), params(4))
    np.testing.assert_array_equal(out.data, 0.5)


def test_subject_object_order_matters(rng):
    p = params(4, rng=rng)
    s, o, L = T(rng.normal(size=4)), T(rng.normal(size=4)), T(rng.normal(size=(5, 4)))
    assert not np.allclose(conv_transe_score(s, o, L, p).data, conv_transe_score(o, s, L, p).data)


def test_matches_direct_evaluation(rng):
    d, C, K = 5, 2, 3
    p = params(d, C, K, rng=rng)
    s, o, L = rng.normal(size=d), rng.normal(size=d), rng.normal(size=(3, d))
    x = np.pad(np.stack([s, o]), ((0, 0), (1, 1)))
    maps = np.array([[(p.kernels.data[c] * x[:, i:i + K]).sum() + p.conv_bias.data[c]
                      for i in range(d)] for c in range(C)])
    v = np.maximum(np.maximum(maps, 0).reshape(-1) @ p.W_fc.data + p.b_fc.data, 0)
    expect = 1 / (1 + np.exp(-(L @ v)))
    np.testing.assert_allclose(conv_transe_score(T(s), T(o), T(L), p).data, expect, atol=1e-14)


def test_batch_matches_single(rng):
    p = params(4, rng=rng)
    S, O, L = rng.normal(size=(3, 4)), rng.normal(size=(3, 4)), rng.normal(size=(6, 4))
    batch = conv_transe_score(T(S), T(O), T(L), p).data
    assert batch.shape == (3, 6)
    for k in range(3):
        np.testing.assert_allclose(batch[k], conv_transe_score(T(S[k]), T(O[k]), T(L), p).data,
                                   atol=1e-14)
    assert ((batch > 0) & (batch < 1)).all()


def test_shape_errors(rng):
    p = params(4)
    with pytest.raises(ShapeError):
        conv_transe_score(T(np.ones(4)), T(np.ones(3)), T(np.ones((2, 4))), p)
    with pytest.raises(ShapeError):
        conv_transe_score(T(np.ones(4)), T(np.ones(4)), T(np.ones((2, 3))), p)


class TestLoss:
    def test_half(self):
        assert abs(bce_loss(T([[0.5]]), [[1]]).data - np.log(2)) < 1e-15
        assert abs(bce_loss(T([[0.5]]), [[1]]).data - 0.69315) < 1e-5

    def test_confident_negative(self):
        assert bce_loss(T([[1e-9]]), [[0]]).data < 1e-8

    def test_clamped_extremes_are_finite(self):
        loss = bce_loss(T([[0.0, 1.0]]), [[1, 0]]).data
        assert np.isfinite(loss) and loss == pytest.approx(-2 * np.log(1e-12), rel=1e-5)

    def test_mean_over_rows_sum_over_columns(self, rng):
        P, Y = rng.uniform(0.05, 0.95, (4, 3)), (rng.random((4, 3)) < 0.5).astype(float)
        ref = -(Y * np.log(P) + (1 - Y) * np.log(1 - P)).sum() / 4
        assert bce_loss(T(P), Y).data == pytest.approx(ref, rel=1e-14)

    def test_column_permutation_invariance(self, rng):
        P, Y = rng.uniform(0.05, 0.95, (4, 5)), (rng.random((4, 5)) < 0.5).astype(float)
        perm = rng.permutation(5)
        assert bce_loss(T(P[:, perm]), Y[:, perm]).data == pytest.approx(bce_loss(T(P), Y).data)

    def test_non_binary_labels_rejected(self):
        with pytest.raises(ValueError):
            bce_loss(T([[0.5]]), [[0.3]])

    def test_monotone_in_positive_logit(self, rng):
        p = params(3, rng=rng, scale=1.0)
        s, o = T(rng.normal(size=3)), T(rng.normal(size=3))
        v = conv_transe_features(s, o, p).data
        assert v.any()
        L = rng.normal(size=(2, 3))
        losses = []
        for step in range(4):
            L_k = L.copy()
            L_k[0] += step * v / np.dot(v, v)  # raises the type-0 logit by ``step``
            losses.append(float(bce_loss(reshape(conv_transe_score(s, o, T(L_k), p), (1, 2)), [[1, 0]]).data))
        assert np.all(np.diff(losses) < 0)


def test_gradients(rng):
    p = params(4, C=2, rng=rng)
    s, o = T(rng.normal(size=(2, 4)), requires_grad=True), T(rng.normal(size=(2, 4)), requires_grad=True)
    L = T(rng.normal(size=(3, 4)), requires_grad=True)
    Y = np.array([[1, 0, 0], [0, 1, 1]])
    check_grads(lambda: bce_loss(conv_transe_score(s, o, L, p), Y),
                [s, o, L, *p.tensors().values()])

import numpy as np
import pytest

from grouptkg.mapper import (MappingMatrix, effective_mapping, entities_to_groups,
                             groups_to_entities)
from grouptkg.tensor import NonFiniteError, ShapeError, Tensor, tsum

from helpers import check_grads, simplex_projection_oracle

T = Tensor


def test_zero_logits_give_uniform_rows():
    M = effective_mapping(T(np.zeros((3, 16)))).data
    np.testing.assert_allclose(M, 1 / 16)


def test_dominant_logit_gives_one_hot():
    raw = np.zeros((1, 16))
    raw[0, 0] = 2.0
    M = effective_mapping(T(raw)).data
    np.testing.assert_array_equal(M, simplex_projection_oracle(raw[0])[None])
    assert M[0, 0] == 1.0 and (M[0, 1:] == 0).all()


def test_rows_on_simplex(rng):
    mm = MappingMatrix(T(rng.normal(size=(20, 16)), requires_grad=True))
    assert (mm.n_entities, mm.n_groups) == (20, 16)
    M = mm.effective().data
    assert (M >= 0).all()
    np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-6)


def test_non_finite_raw_rejected():
    with pytest.raises(NonFiniteError):
        effective_mapping(T(np.array([[0.0, np.nan]])))


def test_hand_example_entities_to_groups():
    M = T([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    E = T([[2.0], [4.0], [6.0]])
    np.testing.assert_allclose(entities_to_groups(M, E).data, [[5.0], [7.0]])


def test_hand_example_groups_to_entities():
    out = groups_to_entities(T([[0.5, 0.5]]), T([[2.0], [6.0]]))
    np.testing.assert_allclose(out.data, [[4.0]])


def test_identity_and_zero(rng):
    E = rng.normal(size=(4, 3))
    np.testing.assert_array_equal(entities_to_groups(T(np.eye(4)), T(E)).data, E)
    np.testing.assert_array_equal(groups_to_entities(T(np.eye(4)), T(E)).data, E)
    assert not entities_to_groups(T(rng.random((4, 2))), T(np.zeros((4, 3)))).data.any()


def test_identical_group_rows_pass_through(rng):
    M = effective_mapping(T(rng.normal(size=(7, 5)))).data
    v = rng.normal(size=3)
    out = groups_to_entities(T(M), T(np.tile(v, (5, 1)))).data
    np.testing.assert_allclose(out, np.tile(v, (7, 1)), atol=1e-12)


def test_convexity(rng):
    M = effective_mapping(T(rng.normal(size=(30, 6)))).data
    G = rng.normal(size=(6, 4))
    out = groups_to_entities(T(M), T(G)).data
    assert (out <= G.max(axis=0) + 1e-12).all() and (out >= G.min(axis=0) - 1e-12).all()


def test_mass_conservation(rng):
    M = rng.random((9, 4))
    E = rng.normal(size=(9, 5))
    G = entities_to_groups(T(M), T(E)).data
    np.testing.assert_allclose(G.sum(axis=0), (M.sum(axis=1)[:, None] * E).sum(axis=0))


def test_relabeling_equivariance(rng):
    M = effective_mapping(T(rng.normal(size=(8, 5)))).data
    E = rng.normal(size=(8, 3))
    perm = rng.permutation(5)
    G = entities_to_groups(T(M), T(E)).data
    np.testing.assert_allclose(entities_to_groups(T(M[:, perm]), T(E)).data, G[perm])


def test_blockwise_matches_loop(rng):
    M = rng.random((4, 3))
    E = rng.normal(size=(3 * 4, 2))
    G = entities_to_groups(T(M), T(E), blocks=3).data
    ref = np.concatenate([M.T @ E[k * 4:(k + 1) * 4] for k in range(3)])
    np.testing.assert_allclose(G, ref)
    back = groups_to_entities(T(M), T(G), blocks=3).data
    np.testing.assert_allclose(back, np.concatenate([M @ G[k * 3:(k + 1) * 3] for k in range(3)]))


def test_shape_errors():
    with pytest.raises(ShapeError, match="entities_to_groups"):
        entities_to_groups(T(np.ones((3, 2))), T(np.ones((4, 2))))
    with pytest.raises(ShapeError, match="groups_to_entities"):
        groups_to_entities(T(np.ones((3, 2))), T(np.ones((3, 2))))


def test_gradients_through_mapping_and_entities(rng):
    raw = T(rng.normal(size=(5, 3)), requires_grad=True)
    E = T(rng.normal(size=(5, 2)), requires_grad=True)
    W = T(rng.normal(size=(3, 2)))

    def f():
        M = effective_mapping(raw)
        G = entities_to_groups(M, E)
        back = groups_to_entities(M, G * W)
        return tsum(back * back)

    check_grads(f, [raw, E])

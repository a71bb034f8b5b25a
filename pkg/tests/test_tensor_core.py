import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensorapprox.errors import DimensionError
from tensorapprox.tensor_core import (
    as_tensor,
    contract,
    contract_except,
    fold,
    fold_bipartite,
    hs_norm,
    index_set,
    inner,
    mode_product,
    outer,
    project,
    projection_norm2,
    rank_one_value,
    unfold,
    unfold_bipartite,
)

shapes = st.lists(st.integers(1, 4), min_size=1, max_size=4).map(tuple)


def _tensor(shape, seed):
    return np.random.default_rng(seed).standard_normal(shape)


def test_inner_small_cases():
    e1 = np.array([1.0, 0.0])
    assert inner(outer(e1, e1), outer(e1, e1)) == 1.0
    assert inner([[1, 2], [3, 4]], np.eye(2)) == 5.0


def test_inner_against_loop(rng):
    S, T = rng.standard_normal((3, 4, 2)), rng.standard_normal((3, 4, 2))
    loop = sum(S[i] * T[i] for i in itertools.product(range(3), range(4), range(2)))
    assert inner(S, T) == pytest.approx(loop, rel=1e-13)
    assert inner(T, T) == pytest.approx(hs_norm(T) ** 2, rel=1e-13)


def test_inner_shape_mismatch():
    with pytest.raises(DimensionError):
        inner(np.zeros((2, 3)), np.zeros((3, 2)))


def test_hs_norm_values():
    assert hs_norm(np.zeros((3, 2, 4))) == 0.0
    T = np.zeros((2, 3, 1))
    T[1, 2, 0] = 1.0
    assert hs_norm(T) == 1.0
    assert hs_norm(np.full((2, 2, 2), 2.0)) == pytest.approx(np.sqrt(32))


def test_contract_first_row():
    T = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(contract(T, [1.0, 0.0], [0]), T[0])


def test_contract_full_is_inner(rng):
    T = rng.standard_normal((2, 3, 2))
    X = rng.standard_normal((2, 3, 2))
    assert contract(T, X, [0, 1, 2]) == pytest.approx(inner(T, X))


def test_contract_rejects_bad_modes(rng):
    T = rng.standard_normal((2, 3, 4))
    with pytest.raises(DimensionError):
        contract(T, np.zeros((4, 2)), [2, 0])
    with pytest.raises(DimensionError):
        contract(T, np.zeros(3), [0])
    with pytest.raises(DimensionError):
        contract(T, np.zeros(3), [5])


def test_contract_except_matches_einsum(rng):
    T = rng.standard_normal((3, 4, 5))
    x, y, z = rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(5)
    np.testing.assert_allclose(contract_except(T, [x, y, z], [1]), np.einsum("ijk,i,k->j", T, x, z))
    np.testing.assert_allclose(contract_except(T, [x, y, z], [0, 2]), np.einsum("ijk,j->ik", T, y))
    assert rank_one_value(T, [x, y, z]) == pytest.approx(np.einsum("ijk,i,j,k->", T, x, y, z))


def test_unfold_column_order():
    T = np.arange(24.0).reshape(2, 3, 4)
    M = unfold(T, 1)
    assert M.shape == (3, 8)
    # columns enumerate (i0, i2) with i2 fastest
    assert M[2, 1 * 4 + 3] == T[1, 2, 3]
    assert unfold(T, 0)[1, 2 * 4 + 1] == T[1, 2, 1]


@given(shapes, st.integers(0, 1000))
def test_fold_inverts_unfold(shape, seed):
    T = _tensor(shape, seed)
    for mode in range(T.ndim):
        np.testing.assert_array_equal(fold(unfold(T, mode), mode, shape), T)


@given(st.lists(st.integers(1, 3), min_size=2, max_size=4).map(tuple), st.integers(0, 1000))
def test_fold_bipartite_roundtrip(shape, seed):
    T = _tensor(shape, seed)
    d = len(shape)
    K = list(range(0, d, 2))
    L = [m for m in range(d) if m not in K]
    M = unfold_bipartite(T, K, L)
    assert M.shape == (int(np.prod([shape[k] for k in K])), int(np.prod([shape[l] for l in L])))
    np.testing.assert_array_equal(fold_bipartite(M, K, L, shape), T)


def test_unfold_bipartite_rejects_bad_partition():
    with pytest.raises(DimensionError):
        unfold_bipartite(np.zeros((2, 2, 2)), [0], [0, 1])


def test_mode_product(rng):
    T = rng.standard_normal((3, 4, 2))
    M = rng.standard_normal((5, 4))
    np.testing.assert_allclose(mode_product(T, M, 1), np.einsum("ijk,aj->iak", T, M))


@given(st.integers(0, 1000))
def test_projection_properties(seed):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((4, 3, 5))
    frames = [np.linalg.qr(rng.standard_normal((n, r)))[0] for n, r in zip(T.shape, (2, 2, 3))]
    core, P = project(T, frames)
    assert core.shape == (2, 2, 3)
    # idempotent, orthogonal, norm identity
    _, PP = project(P, frames)
    np.testing.assert_allclose(PP, P, atol=1e-12)
    assert abs(inner(T - P, P)) < 1e-10
    assert projection_norm2(T, frames) == pytest.approx(hs_norm(P) ** 2, rel=1e-12)
    assert hs_norm(T - P) ** 2 == pytest.approx(hs_norm(T) ** 2 - hs_norm(core) ** 2, rel=1e-9, abs=1e-10)


def test_index_set_validation():
    np.testing.assert_array_equal(index_set([0, 2, 5], 6), [0, 2, 5])
    for bad in ([], [1, 1], [2, 1], [0, 6], [-1, 0]):
        with pytest.raises(DimensionError):
            index_set(bad, 6)


def test_as_tensor_rejects_scalars():
    with pytest.raises(DimensionError):
        as_tensor(3.0)
    assert as_tensor([[1, 2]]).dtype == np.float64

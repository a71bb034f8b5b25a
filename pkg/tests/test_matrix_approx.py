import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensorapprox.errors import DegenerateInputError, SingularPivotError
from tensorapprox.matrix_approx import (
    cur_classic,
    cur_error_bound,
    cur_local,
    cur_optimal,
    entrywise_max_norm,
    max_minor,
    pivot_score,
    pivot_search,
    row_sample_refine,
    svd_rank_k,
)


def _low_rank(rng, m, n, k):
    return rng.standard_normal((m, k)) @ rng.standard_normal((k, n))


def test_svd_tail_error():
    _, Ak, err = svd_rank_k(np.diag([3.0, 2.0, 1.0]), 2)
    assert err == pytest.approx(1.0)
    np.testing.assert_allclose(Ak, np.diag([3.0, 2.0, 0.0]), atol=1e-14)


def test_svd_rank_one_exact(rng):
    A = np.outer(rng.standard_normal(4), rng.standard_normal(3))
    f, A1, err = svd_rank_k(A, 1)
    np.testing.assert_allclose(A1, A, atol=1e-12)
    assert err < 1e-12
    # k beyond the rank returns A
    f, A5, err = svd_rank_k(A, 5)
    assert f.rank == 1 and err < 1e-12


@given(st.integers(0, 10_000))
def test_svd_error_matches_tail(seed):
    A = np.random.default_rng(seed).standard_normal((5, 4))
    s = np.linalg.svd(A, compute_uv=False)
    f, A2, err = svd_rank_k(A, 2)
    assert np.linalg.norm(A - A2) ** 2 == pytest.approx(s[2] ** 2 + s[3] ** 2, abs=1e-10)
    assert err ** 2 == pytest.approx(s[2] ** 2 + s[3] ** 2, abs=1e-10)
    np.testing.assert_allclose(f.u.T @ f.u, np.eye(2), atol=1e-12)
    assert np.all(np.diff(f.s) <= 0) and np.all(f.s > 0)


def test_row_sampling_exact_rank(rng):
    A = _low_rank(rng, 10, 8, 3)
    trace, B = row_sample_refine(A, 3, [0, 4, 7])
    assert trace.errors[0] < 1e-10
    np.testing.assert_allclose(B, A, atol=1e-9)


@given(st.integers(0, 10_000))
def test_row_sampling_monotone(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((20, 15))
    rows = np.sort(rng.choice(20, 5, replace=False))
    trace, B = row_sample_refine(A, 3, rows, max_rounds=15)
    e, nrm = np.array(trace.errors), np.array(trace.norms)
    assert np.all(np.diff(e) <= 1e-10)
    assert np.all(np.diff(nrm) >= -1e-10)
    assert e[-1] >= svd_rank_k(A, 3)[2] - 1e-10


def test_row_sampling_converges_to_svd(rng):
    U = np.linalg.qr(rng.standard_normal((20, 20)))[0]
    V = np.linalg.qr(rng.standard_normal((15, 15)))[0]
    s = np.array([10, 8, 6, 1, 0.5, 0.2] + [0.1] * 9)
    A = (U[:, :15] * s) @ V.T
    trace, _ = row_sample_refine(A, 3, [0, 1, 2, 3], max_rounds=200, tol=0.0)
    assert trace.errors[-1] == pytest.approx(svd_rank_k(A, 3)[2], abs=1e-6)


def test_row_sampling_degenerate(rng):
    A = np.outer(rng.standard_normal(6), rng.standard_normal(5))
    with pytest.raises(DegenerateInputError):
        row_sample_refine(A, 2, [0, 1, 2])
    with pytest.raises(DegenerateInputError):
        row_sample_refine(rng.standard_normal((6, 5)), 3, [0, 1])


def test_cur_optimal_full_sampling(rng):
    A = rng.standard_normal((6, 5))
    f = cur_optimal(A, range(6), range(5))
    np.testing.assert_allclose(f.matrix(), A, atol=1e-10)
    r1 = np.outer(rng.standard_normal(6), rng.standard_normal(5))
    np.testing.assert_allclose(cur_optimal(r1, [1, 3], [0, 2, 4]).matrix(), r1, atol=1e-10)


def test_cur_local_specializations(rng):
    A = rng.standard_normal((7, 6))
    I, J = [0, 2, 5], [1, 3, 4]
    opt = cur_optimal(A, I, J)
    loc = cur_local(A, I, J, range(7), range(6))
    np.testing.assert_allclose(loc.U, opt.U, atol=1e-10)
    loc = cur_local(A, I, J, I, J)
    np.testing.assert_allclose(loc.U, np.linalg.pinv(A[np.ix_(I, J)]), atol=1e-10)
    np.testing.assert_allclose(loc.matrix(), cur_classic(A, I, J).matrix(), atol=1e-9)


def test_cur_local_least_squares_oracle(rng):
    A = rng.standard_normal((8, 7))
    I, J, Ip, Jp = [0, 3], [1, 5], [0, 2, 3, 6], [1, 2, 5]
    U = cur_local(A, I, J, Ip, Jp).U
    # U minimizes ||A[I',J'] - A[I',J] U A[I,J']|| ; solve with a Kronecker least-squares
    K = np.kron(A[np.ix_(Ip, J)], A[np.ix_(I, Jp)].T)
    u, *_ = np.linalg.lstsq(K, A[np.ix_(Ip, Jp)].ravel(), rcond=None)
    np.testing.assert_allclose(U, u.reshape(2, 2), atol=1e-8)


def test_cur_classic_identity():
    f = cur_classic(np.eye(4), [0, 1], [0, 1])
    np.testing.assert_allclose(f.matrix(), np.diag([1.0, 1, 0, 0]))


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_cur_classic_interpolation(seed, k):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((8, 7))
    I = np.sort(rng.choice(8, k, replace=False))
    J = np.sort(rng.choice(7, k, replace=False))
    B = cur_classic(A, I, J).matrix()
    np.testing.assert_allclose(B[:, J], A[:, J], atol=1e-10)
    np.testing.assert_allclose(B[I, :], A[I, :], atol=1e-10)
    assert np.linalg.norm(A - cur_optimal(A, I, J).matrix()) <= np.linalg.norm(A - B) + 1e-10
    assert svd_rank_k(A, k)[2] <= np.linalg.norm(A - B) + 1e-10


def test_cur_classic_singular_pivot():
    A = np.ones((3, 3))
    with pytest.raises(SingularPivotError):
        cur_classic(A, [0, 1], [0, 1])
    f = cur_classic(A, [0, 1], [0, 1], allow_pseudo_inverse=True)
    assert f.pseudo_inverse
    np.testing.assert_allclose(f.matrix(), A, atol=1e-12)


def test_cur_entry(rng):
    A = rng.standard_normal((5, 4))
    f = cur_classic(A, [1, 3], [0, 2])
    assert f.entry(4, 3) == pytest.approx(f.matrix()[4, 3])
    with pytest.raises(IndexError):
        f.entry(5, 0)


def test_pivot_search_dominant_entry():
    I, J, score = pivot_search(np.diag([5.0, 1.0, 0.1]), 1, 60, seed=0)
    assert list(I) == [0] and list(J) == [0]
    assert score == pytest.approx(5.0)


def test_pivot_search_is_max_over_draws(rng):
    A = rng.standard_normal((6, 6))
    _, _, best = pivot_search(A, 2, 30, seed=7)
    for t in range(1, 30):
        assert best >= pivot_search(A, 2, t, seed=7)[2]
    assert pivot_search(A, 2, 30, seed=7)[2] == best


def test_pivot_search_near_exhaustive_top():
    hits = 0
    for seed in range(20):
        A = np.random.default_rng(seed).standard_normal((8, 8))
        pairs = list(itertools.combinations(range(8), 2))
        scores = sorted(
            (abs(np.linalg.det(A[np.ix_(I, J)])) for I in pairs for J in pairs), reverse=True
        )
        _, _, s = pivot_search(A, 2, 500, seed=seed)
        hits += s >= scores[int(0.1 * len(scores))]
    assert hits >= 18


def test_sigma_product_score():
    P = np.diag([2.0, 3.0, 1e-12])
    assert pivot_score(P, "sigma-product") == pytest.approx(6.0)
    assert pivot_score(P, "abs-det") == pytest.approx(6e-12)
    with pytest.raises(ValueError):
        pivot_score(P, "volume")


def test_max_minor_oracle(rng):
    A = rng.standard_normal((5, 5))
    mu, I, J = max_minor(A, 2)
    brute = max(
        abs(np.linalg.det(A[np.ix_(I_, J_)]))
        for I_ in itertools.combinations(range(5), 2)
        for J_ in itertools.combinations(range(5), 2)
    )
    assert mu == pytest.approx(brute)
    assert abs(np.linalg.det(A[np.ix_(I, J)])) == pytest.approx(mu)


def test_error_bound_exact_rank(rng):
    A = _low_rank(rng, 6, 6, 2)
    mu, I, J = max_minor(A, 2)
    assert cur_error_bound(A, I, J, mu) == pytest.approx(0.0, abs=1e-9)
    assert entrywise_max_norm(A - cur_classic(A, I, J).matrix()) < 1e-9


def test_error_bound_linear_in_mu(rng):
    A = rng.standard_normal((6, 6))
    mu, I, J = max_minor(A, 2)
    b = cur_error_bound(A, I, J, mu)
    assert cur_error_bound(A, I, J, 2 * mu) == pytest.approx(2 * b)
    assert entrywise_max_norm(A - cur_classic(A, I, J).matrix()) <= b

import itertools

import numpy as np
import pytest

from tensorapprox.amm import (
    StopRule,
    amm,
    build_gram,
    hosvd_init,
    random_init,
    rank_one_amm,
    single_mode_gains,
    singular_tuple_residual,
    top_eigenspace,
)
from tensorapprox.bench import generate
from tensorapprox.errors import DegenerateSpectrumError, NewtonFailure
from tensorapprox.grassmann import (
    chart_zero,
    complete_all,
    flatten_chart,
    principal_angle_distance,
    unflatten_chart,
)
from tensorapprox.newton import (
    NewtonStop,
    build_contraction_cache,
    chart_decomposition,
    hybrid_newton2,
    hybrid_rank_one,
    newton1,
    newton1_jacobian,
    newton1_map,
    newton2,
    newton2_derivative,
    newton2_map,
)
from tensorapprox.tensor_core import outer, rank_one_value


def hosvd_vectors(T):
    return [f.basis[:, 0] for f in hosvd_init(T, (1,) * T.ndim)]


def fd_jacobian(func, x, h):
    cols = []
    for b in range(x.size):
        e = np.zeros_like(x)
        e[b] = h
        cols.append((func(x + e) - func(x - e)) / (2 * h))
    return np.column_stack(cols)


# --- Newton-1 ---------------------------------------------------------------

def test_exact_rank_one_is_a_fixed_point(rng):
    a, b, c = (v / np.linalg.norm(v) for v in (rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(2)))
    T = 2.0 * outer(a, b, c)
    phi = [a / 2, b / 2, c / 2]
    G = np.concatenate(phi) - np.concatenate(newton1_map(T, phi))
    assert np.linalg.norm(G) < 1e-15
    xs, lam, tr = newton1(T, [a, b, c])
    assert lam == pytest.approx(2.0)
    assert tr.extra["steps"][0] < 1e-14


@pytest.mark.parametrize("shape", [(4, 4, 4), (3, 4, 5), (2, 3, 2, 3)])
def test_jacobian_finite_differences(shape):
    rng = np.random.default_rng(sum(shape))
    T = rng.standard_normal(shape)
    phi = rng.standard_normal(sum(shape))
    cuts = np.cumsum(shape)[:-1]

    def G(v):
        return v - np.concatenate(newton1_map(T, np.split(v, cuts)))

    DG = newton1_jacobian(T, np.split(phi, cuts))
    FD = fd_jacobian(G, phi, 1e-6)
    assert np.max(np.abs(DG - FD)) < 1e-6 * max(1.0, np.max(np.abs(DG)))


def test_jacobian_structure(rng):
    T = rng.standard_normal((3, 4, 5))
    u, v, w = rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(5)
    DG = newton1_jacobian(T, [u, v, w])
    np.testing.assert_allclose(DG, DG.T)
    np.testing.assert_allclose(DG[:3, 3:7], -np.einsum("ijk,k->ij", T, w))
    np.testing.assert_allclose(DG[:3, 7:], -np.einsum("ijk,j->ik", T, v))
    np.testing.assert_allclose(DG[3:7, 7:], -np.einsum("ijk,i->jk", T, u))
    np.testing.assert_array_equal(newton1_jacobian(np.zeros((2, 3, 2)), [u[:2], v[:3], w[:2]]), np.eye(7))


def test_newton1_quadratic_convergence():
    T = np.random.default_rng(0).standard_normal((5, 5, 5))
    xs, lam0, _ = rank_one_amm(T, hosvd_vectors(T), StopRule(2, 0.0))
    ys, lam, tr = newton1(T, xs)
    res = tr.extra["residuals"]
    assert tr.stop_reason == "converged"
    assert res[-1] < 1e-10 and tr.iterations <= 6
    late = [b / a for a, b in zip(res[-3:-1], res[-2:])]
    assert min(late) < 0.1
    # the AMM limit from the same start is the same singular tuple
    _, lam_amm, _ = rank_one_amm(T, xs, StopRule(5000, 0.0))
    assert lam == pytest.approx(lam_amm, abs=1e-8)
    assert lam == pytest.approx(rank_one_value(T, ys))


def test_hybrid_rank_one_fallback_and_success():
    found = {"newton": 0, "fallback": 0}
    for s in range(8):
        T = np.random.default_rng(s).standard_normal((5, 5, 5))
        xs, lam, tr = hybrid_rank_one(T, hosvd_vectors(T), fallback=StopRule(60, 1e-12))
        assert singular_tuple_residual(T, xs) < 1e-4
        found["fallback" if tr.stop_reason.startswith("fallback") else "newton"] += 1
        if not tr.stop_reason.startswith("fallback"):
            assert singular_tuple_residual(T, xs) < 1e-8
            assert lam >= tr.extra["warm"].final - 1e-9
    assert found["newton"] >= 6


def test_newton1_rejects_bad_input():
    with pytest.raises(Exception):
        newton1(np.ones((2, 2)), [np.ones(2), np.ones(2)])
    T = np.zeros((2, 2, 2))
    T[0, 0, 0] = 1.0
    with pytest.raises(Exception):
        newton1(T, [np.eye(2)[1]] * 3)


def test_newton_stop_validation():
    assert NewtonStop().change_tol == pytest.approx(4.53999e-5, rel=1e-5)
    with pytest.raises(ValueError):
        NewtonStop(max_iters=0)


# --- Newton-2 ---------------------------------------------------------------

def _anchor(T, ranks, sweeps, seed):
    frames, _ = amm(T, ranks, random_init(T.shape, ranks, seed), StopRule(sweeps, 0.0))
    return complete_all(frames)


def test_cache_symmetry_counts_and_gram(rng):
    T = rng.standard_normal((6, 5, 4, 3))
    ranks = (2, 2, 3, 1)
    anchor = complete_all(random_init(T.shape, ranks, 4))
    cache = build_contraction_cache(T, anchor)
    for i, j in itertools.permutations(range(4), 2):
        np.testing.assert_array_equal(cache.get(i, j), np.transpose(cache.get(j, i), (0, 2, 1)))
        assert cache.count(i, j) == np.prod([ranks[l] for l in range(4) if l not in (i, j)])
    for j in range(4):
        for via in range(4):
            if via != j:
                np.testing.assert_allclose(cache.gram(j, via), build_gram(T, anchor, j), atol=1e-10)


def test_cache_single_column_case(rng):
    T = rng.standard_normal((3, 4, 5))
    anchor = complete_all(random_init(T.shape, (1, 1, 1), 0))
    cache = build_contraction_cache(T, anchor)
    assert cache.count(1, 2) == 1
    np.testing.assert_allclose(cache.get(1, 2)[0], np.einsum("ijk,i->jk", T, anchor[0].basis[:, 0]))


@pytest.mark.parametrize("seed,shape,ranks", [(0, (5, 5, 5), (2, 2, 2)), (1, (5, 4, 6), (2, 2, 3)), (2, (4, 3, 4, 3), (2, 1, 2, 2))])
def test_derivative_matches_finite_differences(seed, shape, ranks):
    T = np.random.default_rng(seed).standard_normal(shape)
    anchor = _anchor(T, ranks, 2, seed)
    F0, DF = newton2_derivative(T, anchor)
    np.testing.assert_allclose(flatten_chart(F0), flatten_chart(newton2_map(T, anchor, chart_zero(anchor))), atol=1e-12)

    def F(x):
        return flatten_chart(newton2_map(T, anchor, unflatten_chart(x, anchor)))

    FD = fd_jacobian(F, np.zeros(DF.shape[0]), 1e-5)
    assert np.max(np.abs(FD - DF)) < 1e-5 * max(1.0, np.max(np.abs(DF)))
    sizes = [(a.n - a.r) * a.r for a in anchor]
    off = np.concatenate([[0], np.cumsum(sizes)])
    for i in range(len(anchor)):
        assert not np.any(DF[off[i]:off[i + 1], off[i]:off[i + 1]])


def test_fixed_point_has_zero_image():
    T = generate("lowrank:6x6x6:ranks=2,2,2:noise=0:seed=3")
    anchor = complete_all(hosvd_init(T, (2, 2, 2)))
    F0, _ = newton2_derivative(T, anchor)
    assert np.max(np.abs(flatten_chart(F0))) < 1e-12
    frames, tr = newton2(T, (2, 2, 2), anchor)
    assert tr.stop_reason == "converged" and tr.iterations == 1
    assert tr.extra["displacements"][0] < 1e-12


def test_degenerate_spectrum_detected():
    T = outer(*[np.eye(3)[0]] * 3) + outer(*[np.eye(3)[1]] * 3)
    # with the other frames spanning e0, e1 the mode-0 Gram matrix is diag(1, 1, 0)
    anchor = complete_all([np.eye(3)[:, :1], np.eye(3)[:, :2], np.eye(3)[:, :2]])
    with pytest.raises(DegenerateSpectrumError):
        chart_decomposition(anchor, build_contraction_cache(T, anchor))
    with pytest.raises(DegenerateSpectrumError):
        newton2(T, (1, 2, 2), anchor)


def test_newton2_converges_to_amm_limit():
    T = np.random.default_rng(7).standard_normal((6, 6, 6))
    ranks = (2, 2, 2)
    init = hosvd_init(T, ranks)
    start, _ = amm(T, ranks, init, StopRule(8, 0.0))
    frames, tr = newton2(T, ranks, start)
    ref, ref_tr = amm(T, ranks, start, StopRule(2000, 1e-15))
    assert tr.stop_reason == "converged"
    assert tr.final == pytest.approx(ref_tr.final, rel=1e-6)
    assert tr.iterations < ref_tr.iterations
    d = tr.extra["displacements"]
    assert d[-1] / d[-2] < 0.2
    # fixed-point consistency
    for j, f in enumerate(frames):
        A = build_gram(T, frames, j)
        top = top_eigenspace(A, ranks[j]).frame
        assert principal_angle_distance(top, f) < 1e-8
    assert max(single_mode_gains(T, frames)) < 1e-8


def test_hybrid_newton2_recovers_and_falls_back():
    T = generate("lowrank:8x8x8:ranks=2,2,2:noise=0:seed=0")
    frames, tr = hybrid_newton2(T, (2, 2, 2), hosvd_init(T, (2, 2, 2)))
    assert tr.final == pytest.approx(np.sum(T * T), rel=1e-12)
    for s in range(4):
        T = np.random.default_rng(100 + s).standard_normal((8, 8, 8))
        init = random_init(T.shape, (2, 2, 2), s)
        frames, tr = hybrid_newton2(T, (2, 2, 2), init, fallback=StopRule(200, 1e-13))
        obj = np.asarray(tr.objectives)
        assert obj[-1] >= obj[0]
        assert tr.extra["attempts"] >= 1
        if tr.stop_reason.startswith("fallback"):
            assert tr.stop_reason.split(":")[1] in ("StepRejectedError", "SingularJacobianError",
                                                    "DegenerateSpectrumError", "NewtonFailure",
                                                    "DivergenceError", "NotConverged")


def test_newton2_failure_carries_state():
    T = np.random.default_rng(102).standard_normal((8, 8, 8))
    start, _ = amm(T, (2, 2, 2), random_init(T.shape, (2, 2, 2), 2), StopRule(1, 0.0))
    with pytest.raises(NewtonFailure) as info:
        newton2(T, (2, 2, 2), start)
    assert len(info.value.frames) == 3
    assert info.value.trace.objectives[0] == pytest.approx(amm(T, (2, 2, 2), start, StopRule(1, 0.0))[1].objectives[0])

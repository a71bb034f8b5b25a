"""
Newton methods for fixed points of the alternating maximization maps.

Newton-1 (rank one).  With ``F_i(phi) = T x (phi_j, j != i)`` a singular
tuple ``(u, lambda)`` of ``T`` corresponds to the fixed point
``phi = lambda^{-1/(d-2)} u`` of ``F``.  Newton's method is applied to
``G(phi) = phi - F(phi)`` and the result is rescaled to unit vectors.

Newton-2 (multilinear rank).  The AMM map sends a tuple of subspaces to
the top eigenspaces of the Gram matrices ``A_j``.  It is written in the
affine chart anchored at the current tuple, where the current point is
``X = 0`` and the image is ``F(0) = [X_{j,0} Y_{j,0}^{-1}]``.  The
derivative ``DF(0)`` follows from first-order perturbation of the Gram
matrices and of their top eigenvectors.  After each step the chart is
re-anchored at the new tuple.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .amm import (
    RunTrace,
    StopRule,
    _prepare_vectors,
    amm,
    build_gram,
    objective,
    rank_one_amm,
    singular_tuple_residual,
    top_eigenspace,
)
from .errors import (
    DegenerateInputError,
    DegenerateSpectrumError,
    DimensionError,
    DivergenceError,
    NewtonFailure,
    OutOfChartError,
    SingularJacobianError,
    StepRejectedError,
)
from .grassmann import (
    OrthoFrame,
    as_frame,
    chart_coordinates,
    chart_to_tuple,
    complete_all,
    flatten_chart,
    unflatten_chart,
)
from .tensor_core import contract_except, multi_mode_product, rank_one_value

JACOBIAN_COND_MAX = 1e12
GAP_TOL = 1e-10


@dataclass(frozen=True)
class NewtonStop:
    max_iters: int = 10
    change_tol: float = math.exp(-10)

    def __post_init__(self):
        if self.max_iters < 1 or self.change_tol <= 0:
            raise ValueError("max_iters and change_tol must be positive")


def _solve_checked(M, rhs, what):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size and (s[-1] == 0.0 or s[0] / s[-1] > JACOBIAN_COND_MAX):
        cond = np.inf if s[-1] == 0.0 else s[0] / s[-1]
        raise SingularJacobianError(f"{what} is singular (condition {cond:.3e})")
    return np.linalg.solve(M, rhs)


# --- Newton-1 ---------------------------------------------------------------

def newton1_map(T, phi) -> List[np.ndarray]:
    """``F_i(phi) = T x (phi_j, j != i)``."""
    return [contract_except(T, phi, [i]) for i in range(len(phi))]


def newton1_jacobian(T, vectors) -> np.ndarray:
    """Jacobian of ``G(phi) = phi - F(phi)``, of size ``sum(n_i)``.

    Diagonal blocks are identities; block ``(i, j)`` is
    ``-T x (x_k, k != i, j)`` viewed as an ``n_i x n_j`` matrix.
    """
    T = np.asarray(T, dtype=np.float64)
    d = T.ndim
    if d < 3:
        raise DimensionError("Newton-1 needs at least three modes")
    sizes = list(T.shape)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    DG = np.eye(offsets[-1])
    for i, j in itertools.combinations(range(d), 2):
        M = contract_except(T, vectors, [i, j])  # n_i x n_j
        DG[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]] = -M
        DG[offsets[j]:offsets[j + 1], offsets[i]:offsets[i + 1]] = -M.T
    return DG


def _fixed_point_scale(T, xs):
    """``f_T(x)^{-1/(d-2)} x`` with the sign of ``x_0`` chosen so that ``f_T > 0``."""
    d = T.ndim
    f = rank_one_value(T, xs)
    if f < 0.0:
        xs = [-xs[0]] + list(xs[1:])
        f = -f
    if f <= 1e-14 * max(np.linalg.norm(T), 1e-300):
        raise DegenerateInputError("f_T vanishes at the start; Newton-1 needs a nonzero value")
    return xs, f, np.concatenate(xs) * f ** (-1.0 / (d - 2))


def newton1(T, start, stop: NewtonStop = NewtonStop()):
    """Newton's method for a singular tuple, started from unit vectors.

    After every step the iterate is normalized and rescaled back onto the
    fixed-point scale ``f_T(x)^{-1/(d-2)} x``, which leaves fixed points and
    quadratic convergence intact but keeps the scale from drifting.  Once
    the relative step drops below ``stop.change_tol`` one more step is taken,
    so the reported tuple carries the full quadratic gain.

    Returns ``(vectors, lambda, trace)``.  ``trace.objectives`` holds
    ``f_T`` of the normalized iterates, ``trace.extra["residuals"]`` their
    singular-tuple residuals and ``trace.extra["steps"]`` the relative
    Newton step lengths.
    """
    T, xs = _prepare_vectors(T, start)
    if T.ndim < 3:
        raise DimensionError("Newton-1 needs at least three modes")
    xs, f, phi = _fixed_point_scale(T, xs)
    cuts = np.cumsum(T.shape)[:-1]

    trace = RunTrace()
    trace.extra["residuals"] = [singular_tuple_residual(T, xs)]
    trace.extra["steps"] = []
    trace.record(f)
    trace.stop_reason = "max_iters"
    floor = 1e-13 * max(np.linalg.norm(T), 1e-300)
    last_g, growth, small = None, 0, False
    for _ in range(stop.max_iters):
        parts = np.split(phi, cuts)
        G = phi - np.concatenate(newton1_map(T, parts))
        gn = float(np.linalg.norm(G))
        if last_g is not None and gn > last_g and gn > floor:
            growth += 1
            if growth >= 3:
                raise DivergenceError("||G|| grew on three consecutive Newton-1 steps")
        else:
            growth = 0
        last_g = gn
        step = _solve_checked(newton1_jacobian(T, parts), G, "I - DF")
        new = phi - step
        pieces = np.split(new, cuts)
        if not np.all(np.isfinite(new)) or any(np.linalg.norm(p) == 0.0 for p in pieces):
            raise DivergenceError("Newton-1 iterate left the domain")
        change = float(np.linalg.norm(step) / np.linalg.norm(new))
        xs, f, phi = _fixed_point_scale(T, [p / np.linalg.norm(p) for p in pieces])
        trace.extra["steps"].append(change)
        trace.extra["residuals"].append(singular_tuple_residual(T, xs))
        trace.record(f)
        if small:
            trace.stop_reason = "converged"
            break
        small = change < stop.change_tol
    else:
        if small:
            trace.stop_reason = "converged"
    return xs, f, trace


def hybrid_rank_one(T, init, warm_sweeps: int = 2, stop: NewtonStop = NewtonStop(),
                    fallback: StopRule = StopRule(), retry_sweeps: Optional[int] = 5):
    """AMM warm start followed by Newton-1, with AMM as the safety net.

    A Newton run is accepted when it neither fails nor ends below the value
    it started from.  Otherwise AMM continues from the last AMM iterate for
    `retry_sweeps` sweeps and Newton is tried again, until the `fallback`
    sweep budget is spent or AMM converges on its own.  ``retry_sweeps=None``
    disables retries.

    Returns ``(vectors, lambda, trace)``.  ``trace.extra`` records the
    number of ``attempts``, the AMM ``sweeps`` used and ``newton_steps``
    of the accepted run (0 after a pure AMM finish).  A run finished by
    AMM has ``stop_reason = "fallback:<last error>:<amm reason>"``.
    """
    xs, lam, warm = rank_one_amm(T, init, StopRule(max_iters=warm_sweeps, fit_tol=0.0))
    sweeps, attempts, failure = warm.iterations, 0, None
    while True:
        attempts += 1
        try:
            ys, mu, tr = newton1(T, xs, stop)
            if mu < lam - 1e-9 * max(abs(lam), 1.0):
                raise StepRejectedError(f"Newton-1 lowered f_T from {lam:.12g} to {mu:.12g}")
            if tr.stop_reason != "converged":
                raise StepRejectedError("Newton-1 did not converge")
        except (NewtonFailure, DegenerateInputError) as exc:
            failure = exc
        else:
            tr.extra.update(attempts=attempts, sweeps=sweeps, newton_steps=tr.iterations, warm=warm)
            return ys, mu, tr
        budget = fallback.max_iters - (sweeps - warm.iterations)
        chunk = budget if retry_sweeps is None else min(retry_sweeps, budget)
        if chunk <= 0:
            break
        xs, lam, amm_tr = rank_one_amm(T, xs, StopRule(max_iters=chunk, fit_tol=fallback.fit_tol))
        sweeps += amm_tr.iterations
        if amm_tr.stop_reason == "converged" or retry_sweeps is None:
            break
    amm_tr = locals().get("amm_tr") or RunTrace(objectives=[lam], stop_reason="max_iters")
    amm_tr.stop_reason = f"fallback:{type(failure).__name__}:{amm_tr.stop_reason}"
    amm_tr.extra.update(attempts=attempts, sweeps=sweeps, newton_steps=0, warm=warm)
    return xs, lam, amm_tr


# --- Newton-2 ---------------------------------------------------------------

class ContractionCache:
    """``C_ij(J) = T x (u_{k_l, l}, l != i, j)`` for every mode pair and multi-index.

    ``get(i, j)`` returns an array of shape ``(R_ij, n_i, n_j)`` whose first
    axis enumerates ``J`` lexicographically over the remaining modes.
    """

    def __init__(self, T, anchor):
        T = np.asarray(T, dtype=np.float64)
        self.frames = [as_frame(f) for f in anchor]
        self.shape = T.shape
        self.blocks: Dict[Tuple[int, int], np.ndarray] = {}
        d = T.ndim
        for i, j in itertools.combinations(range(d), 2):
            mats = [None if l in (i, j) else self.frames[l].basis.T for l in range(d)]
            S = multi_mode_product(T, mats)
            S = np.moveaxis(S, (i, j), (d - 2, d - 1))
            self.blocks[(i, j)] = S.reshape(-1, T.shape[i], T.shape[j])

    def get(self, i: int, j: int) -> np.ndarray:
        if i < j:
            return self.blocks[(i, j)]
        return np.transpose(self.blocks[(j, i)], (0, 2, 1))

    def count(self, i: int, j: int) -> int:
        return self.get(i, j).shape[0]

    def gram(self, j: int, via: Optional[int] = None) -> np.ndarray:
        """``A_j = sum_{k, J} (C_ji(J) u_{k,i}) (C_ji(J) u_{k,i})^T``."""
        if via is None:
            via = 0 if j != 0 else 1
        P = self.get(j, via) @ self.frames[via].basis  # (R, n_j, r_i)
        return np.einsum("Jak,Jbk->ab", P, P)


def build_contraction_cache(T, anchor) -> ContractionCache:
    return ContractionCache(T, anchor)


@dataclass
class ModeDecomposition:
    """Spectral data of ``A_j`` and the chart split of its top eigenvectors."""

    gram: np.ndarray
    eigvals: np.ndarray  # decreasing
    eigvecs: np.ndarray  # columns match eigvals
    Z: np.ndarray  # [anchor full]^T @ top eigenvectors
    Y: np.ndarray  # top r x r block of Z
    X: np.ndarray  # bottom (n - r) x r block of Z

    @property
    def image(self) -> np.ndarray:
        """Chart block ``X Y^{-1}`` of the top eigenspace."""
        return np.linalg.solve(self.Y.T, self.X.T).T


def chart_decomposition(anchor, cache: ContractionCache) -> List[ModeDecomposition]:
    out = []
    for j, a in enumerate(anchor):
        A = cache.gram(j)
        w, V = np.linalg.eigh(A)
        w, V = w[::-1], V[:, ::-1]
        r = a.r
        if r < a.n:
            gap = w[r - 1] - w[r]
            if gap < GAP_TOL * max(abs(w[0]), 1e-300):
                raise DegenerateSpectrumError(
                    f"mode {j}: eigen-gap {gap:.3e} at rank {r} (lambda_1 = {w[0]:.3e})"
                )
        _, Y, X = chart_coordinates(a, V[:, :r])
        Z = np.vstack([Y, X])
        out.append(ModeDecomposition(A, w, V, Z, Y, X))
    return out


def newton2_derivative(T, anchor, cache: Optional[ContractionCache] = None,
                       decomp: Optional[List[ModeDecomposition]] = None):
    """Image ``F(0)`` and Jacobian ``DF(0)`` of the AMM map in the chart at `anchor`.

    ``DF0[a, b]`` is the derivative of output coordinate ``a`` with respect
    to input coordinate ``b``; coordinates are ordered mode by mode, each
    block ``X_i`` flattened row-major.  Blocks ``d F_i / d X_i`` vanish.
    """
    T = np.asarray(T, dtype=np.float64)
    anchor = complete_all(anchor)
    if cache is None:
        cache = build_contraction_cache(T, anchor)
    if decomp is None:
        decomp = chart_decomposition(anchor, cache)
    d = len(anchor)
    m = [a.n - a.r for a in anchor]
    r = [a.r for a in anchor]
    offsets = np.concatenate([[0], np.cumsum([mi * ri for mi, ri in zip(m, r)])]).astype(int)
    F0 = [dj.image for dj in decomp]
    DF = np.zeros((offsets[-1], offsets[-1]))
    for j in range(d):
        if m[j] == 0:
            continue
        dj = decomp[j]
        top, perp = dj.eigvecs[:, :r[j]], dj.eigvecs[:, r[j]:]
        lam_top, lam_perp = dj.eigvals[:r[j]], dj.eigvals[r[j]:]
        denom = lam_top[None, :] - lam_perp[:, None]  # (m_j, r_j)
        K = anchor[j].full.T @ perp  # perp eigenvectors in anchor coordinates
        Yinv = np.linalg.inv(dj.Y)
        XYinv = dj.X @ Yinv
        for i in range(d):
            if i == j or m[i] == 0:
                continue
            C = cache.get(j, i)  # (R, n_j, n_i)
            Ca = C @ anchor[i].completion  # columns C u_{r_i + p}
            Cb = C @ anchor[i].basis  # columns C u_q
            # v_s^T B_{j,i,p,q} v_t for perp s and top t
            M = (np.einsum("Jxs,Jxp,Jyt,Jyq->pqst", perp[None], Ca, top[None], Cb, optimize=True)
                 + np.einsum("Jxs,Jxq,Jyt,Jyp->pqst", perp[None], Cb, top[None], Ca, optimize=True))
            coef = M / denom  # (m_i, r_i, m_j, r_j)
            W = np.einsum("ns,pqst->pqnt", K, coef)  # (m_i, r_i, n_j, r_j)
            Vj, Uj = W[:, :, :r[j], :], W[:, :, r[j]:, :]
            dF = Uj @ Yinv - XYinv @ (Vj @ Yinv)  # (m_i, r_i, m_j, r_j)
            DF[offsets[j]:offsets[j + 1], offsets[i]:offsets[i + 1]] = \
                dF.reshape(m[i] * r[i], m[j] * r[j]).T
    return F0, DF


def newton2_map(T, anchor, X) -> List[np.ndarray]:
    """The AMM map in chart coordinates, evaluated directly.

    Maps ``X`` to subspaces, replaces each by the top eigenspace of its
    Gram matrix and returns the chart coordinates of the result.
    """
    anchor = complete_all(anchor)
    frames = chart_to_tuple(anchor, X)
    out = []
    for j, a in enumerate(anchor):
        eig = top_eigenspace(build_gram(T, frames, j), a.r)
        out.append(chart_coordinates(a, eig.frame.basis)[0])
    return out


def newton2(T, ranks, init, stop: NewtonStop = NewtonStop(), reject_tol: float = 1e-6):
    """Newton's method on the AMM fixed-point equation, re-anchoring every step.

    Returns ``(frames, trace)``.  ``trace.extra["displacements"]`` holds the
    chart-step norms.  A :class:`NewtonFailure` raised mid-run carries the
    last accepted iterate in ``exc.frames`` and the partial trace in
    ``exc.trace``.
    """
    T = np.asarray(T, dtype=np.float64)
    frames = [OrthoFrame(as_frame(f).basis.copy()) for f in init]
    if len(frames) != T.ndim or any(f.basis.shape != (n, r) for f, n, r in zip(frames, T.shape, ranks)):
        raise DimensionError("init frames do not match the tensor shape and ranks")
    trace = RunTrace()
    trace.extra["displacements"] = []
    f = objective(T, frames)
    trace.record(f)
    trace.stop_reason = "max_iters"
    for _ in range(stop.max_iters):
        try:
            anchor = complete_all(frames)
            F0, DF = newton2_derivative(T, anchor)
            L = DF.shape[0]
            if L == 0:
                trace.stop_reason = "converged"
                break
            delta = _solve_checked(np.eye(L) - DF, flatten_chart(F0), "I - DF(0)")
            new = chart_to_tuple(anchor, unflatten_chart(delta, anchor))
            f_new = objective(T, new)
            if f_new < f - reject_tol * max(abs(f), 1e-300):
                raise StepRejectedError(f"Newton-2 step lowered the objective from {f:.12g} to {f_new:.12g}")
        except (NewtonFailure, OutOfChartError) as exc:
            exc.frames, exc.trace = frames, trace
            if isinstance(exc, OutOfChartError):
                wrapped = NewtonFailure(f"out of chart: {exc}")
                wrapped.frames, wrapped.trace = frames, trace
                raise wrapped from exc
            raise
        frames, f = new, f_new
        disp = float(np.linalg.norm(delta))
        trace.extra["displacements"].append(disp)
        trace.record(f)
        if disp < stop.change_tol:
            trace.stop_reason = "converged"
            break
    return frames, trace


def hybrid_newton2(T, ranks, init, warm_sweeps: int = 1, stop: NewtonStop = NewtonStop(),
                   fallback: StopRule = StopRule(), retry_sweeps: Optional[int] = 5):
    """AMM warm start, then Newton-2, with AMM as the safety net.

    When Newton gives up, AMM continues from the last accepted iterate for
    `retry_sweeps` sweeps and Newton is tried again, until the `fallback`
    sweep budget is spent or AMM converges on its own.  ``retry_sweeps=None``
    runs AMM to the end of the budget after the first failure.

    Returns ``(frames, trace)``.  The trace holds the objective after the
    warm start, after every accepted Newton step and after every AMM sweep,
    in order.  ``trace.extra`` records ``attempts``, AMM ``sweeps``,
    ``newton_iters`` (accepted Newton steps in total) and the final
    Newton run's ``displacements``.
    """
    frames, warm = amm(T, ranks, init, StopRule(max_iters=warm_sweeps, fit_tol=0.0))
    tr = RunTrace()
    tr.objectives, tr.seconds, tr.subproblems = list(warm.objectives), list(warm.seconds), list(warm.subproblems)
    sweeps, attempts, newton_iters, failure = warm.iterations, 0, 0, None

    def absorb(part):
        offset = tr.seconds[-1] if tr.seconds else 0.0
        tr.objectives.extend(part.objectives[1:])
        tr.seconds.extend(s + offset for s in part.seconds[1:])
        tr.subproblems.extend(part.subproblems[1:])

    while True:
        attempts += 1
        try:
            new, ntr = newton2(T, ranks, frames, stop)
        except NewtonFailure as exc:
            failure = exc
            partial = getattr(exc, "trace", None)
            if partial is not None:
                absorb(partial)
                newton_iters += partial.iterations
                frames = getattr(exc, "frames", frames)
        else:
            absorb(ntr)
            newton_iters += ntr.iterations
            if ntr.stop_reason == "converged":
                tr.stop_reason = "converged"
                tr.extra.update(attempts=attempts, sweeps=sweeps, newton_iters=newton_iters,
                                displacements=ntr.extra["displacements"], warm=warm)
                return new, tr
            frames, failure = new, None
        budget = fallback.max_iters - (sweeps - warm.iterations)
        chunk = budget if retry_sweeps is None else min(retry_sweeps, budget)
        if chunk <= 0:
            reason = "max_iters"
            break
        frames, amm_tr = amm(T, ranks, frames, StopRule(max_iters=chunk, fit_tol=fallback.fit_tol))
        absorb(amm_tr)
        sweeps += amm_tr.iterations
        reason = amm_tr.stop_reason
        if reason == "converged" or retry_sweeps is None:
            break
    name = type(failure).__name__ if failure is not None else "NotConverged"
    tr.stop_reason = f"fallback:{name}:{reason}"
    tr.extra.update(attempts=attempts, sweeps=sweeps, newton_iters=newton_iters,
                    displacements=[], warm=warm)
    return frames, tr

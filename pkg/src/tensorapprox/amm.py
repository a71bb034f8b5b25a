"""
Alternating maximization for best multilinear-rank and best rank-one
approximation.

The multilinear-rank solvers maximize ``||P(T)||^2``, the squared norm of
the projection of ``T`` onto ``U_1 (x) ... (x) U_d``.  With every frame but
the i-th fixed, the optimal ``U_i`` is the top-``r_i`` eigenspace of the
Gram matrix ``A_i = M_i M_i^T`` where ``M_i`` is the mode-i unfolding of
``T`` multiplied by ``U_k^T`` along every other mode.

The rank-one solvers maximize ``f_T(x_1, ..., x_d) = <T, x_1 (x) ... (x) x_d>``
over unit vectors.

A block update is only committed when it does not lower the objective, so
every trace is non-decreasing even at ties in the spectrum.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import List, NamedTuple

import numpy as np
import scipy.sparse.linalg

from .errors import DegenerateInputError, DimensionError
from .grassmann import OrthoFrame, as_frame, orthonormalize
from .tensor_core import (
    contract_except,
    multi_mode_product,
    projection_norm2,
    rank_one_value,
    unfold,
)

log = logging.getLogger(__name__)

DENSE_EIG_MAX = 512
# an update may lower the objective by this relative amount of rounding noise;
# without the slack, alternation stalls one step short of a stationary point
COMMIT_SLACK = 8 * np.finfo(np.float64).eps


def _accept(value, current):
    return value >= current - COMMIT_SLACK * abs(current)


@dataclass(frozen=True)
class StopRule:
    max_iters: int = 10
    fit_tol: float = 1e-4

    def __post_init__(self):
        if self.max_iters < 1 or self.fit_tol < 0:
            raise ValueError("max_iters must be positive and fit_tol non-negative")


@dataclass
class RunTrace:
    """Per-iteration record of a solver run.

    ``objectives[0]`` is the value at the starting point; entry ``l`` is the
    value after iteration ``l``.  ``updates`` lists the objective after every
    single block update, so it is a refinement of ``objectives``.
    """

    objectives: List[float] = field(default_factory=list)
    seconds: List[float] = field(default_factory=list)
    subproblems: List[int] = field(default_factory=list)
    updates: List[float] = field(default_factory=list)
    stop_reason: str = ""
    extra: dict = field(default_factory=dict)
    _t0: float = field(default_factory=time.perf_counter, repr=False)
    _count: int = field(default=0, repr=False)

    @property
    def iterations(self) -> int:
        return max(len(self.objectives) - 1, 0)

    @property
    def final(self) -> float:
        return self.objectives[-1]

    def add_subproblems(self, n: int = 1) -> None:
        self._count += n

    def record(self, value: float) -> None:
        self.objectives.append(float(value))
        self.seconds.append(time.perf_counter() - self._t0)
        self.subproblems.append(self._count)

    def rows(self):
        """``(iteration, objective, seconds, subproblems)`` tuples."""
        return list(zip(range(len(self.objectives)), self.objectives, self.seconds, self.subproblems))


def _relative_change(new: float, old: float) -> float:
    if old == 0.0:
        return 0.0 if new == 0.0 else np.inf
    return abs(new - old) / abs(old)


def _check_frames(T, ranks, frames):
    if len(frames) != T.ndim or len(ranks) != T.ndim:
        raise DimensionError(f"need {T.ndim} frames and ranks")
    for k, (f, r) in enumerate(zip(frames, ranks)):
        if f.basis.shape != (T.shape[k], r):
            raise DimensionError(
                f"frame {k} has shape {f.basis.shape}, expected {(T.shape[k], r)}"
            )


def objective(T, frames) -> float:
    """``||P(T)||^2`` evaluated as the squared norm of the core."""
    return projection_norm2(T, frames)


def partial_unfolding(T, frames, i: int) -> np.ndarray:
    """Mode-i unfolding of ``T`` contracted with every frame except the i-th."""
    bases = [None if k == i else as_frame(f).basis.T for k, f in enumerate(frames)]
    return unfold(multi_mode_product(T, bases), i)


def build_gram(T, frames, i: int) -> np.ndarray:
    """Gram matrix ``A_i`` whose top eigenspace is the best mode-i subspace.

    ``A_i = sum_J v_J v_J^T`` over all column multi-indices ``J`` of the
    other frames, with ``v_J = T x (u_{j_k,k} for k != i)``.
    """
    T = np.asarray(T, dtype=np.float64)
    if not 0 <= i < T.ndim:
        raise DimensionError(f"mode {i} out of range")
    if len(frames) != T.ndim:
        raise DimensionError(f"need {T.ndim} frames, got {len(frames)}")
    for k, f in enumerate(frames):
        if k != i and as_frame(f).basis.shape[0] != T.shape[k]:
            raise DimensionError(f"frame {k} does not match mode size {T.shape[k]}")
    M = partial_unfolding(T, frames, i)
    return M @ M.T


class EigenResult(NamedTuple):
    frame: OrthoFrame
    values: np.ndarray  # the r largest eigenvalues, decreasing
    gap: float  # lambda_r - lambda_{r+1}; inf when r == n

    @property
    def degenerate(self) -> bool:
        return self.gap <= 1e-12 * max(abs(self.values[0]), 1e-300)


def top_eigenspace(A, r: int) -> EigenResult:
    """Frame spanning eigenvectors of the `r` largest eigenvalues of symmetric `A`."""
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if not 1 <= r <= n:
        raise DimensionError(f"rank {r} out of range for a {n}x{n} matrix")
    if n <= DENSE_EIG_MAX or r + 1 >= n:
        w, V = np.linalg.eigh(A)
        w, V = w[::-1], V[:, ::-1]
    else:
        w, V = scipy.sparse.linalg.eigsh(A, k=r + 1, which="LA")
        order = np.argsort(w)[::-1]
        w, V = w[order], V[:, order]
    gap = float(w[r - 1] - w[r]) if r < len(w) else np.inf
    return EigenResult(OrthoFrame(np.ascontiguousarray(V[:, :r])), w[:r].copy(), gap)


def _best_mode_update(T, frames, i, r):
    """Optimal frame for mode i and the objective it achieves."""
    M = partial_unfolding(T, frames, i)
    eig = top_eigenspace(M @ M.T, r)
    C = eig.frame.basis.T @ M
    return eig, float(np.dot(C.ravel(), C.ravel()))


def single_mode_gains(T, frames, ranks=None) -> List[float]:
    """Objective gain of replacing each frame by its optimal update, others fixed."""
    frames = [as_frame(f) for f in frames]
    ranks = ranks or [f.r for f in frames]
    base = objective(T, frames)
    return [_best_mode_update(T, frames, i, ranks[i])[1] - base for i in range(len(frames))]


def _commit(frames, i, frame, value, current, trace):
    """Replace frame i if `value` does not lower `current`; returns the new objective."""
    if _accept(value, current):
        frames[i] = frame
        current = value
    trace.updates.append(current)
    return current


def _mode_step(T, frames, i, r, current, trace):
    eig, value = _best_mode_update(T, frames, i, r)
    trace.add_subproblems()
    if eig.degenerate:
        log.debug("mode %d: eigen-gap %.3e at rank %d, update not unique", i, eig.gap, r)
    return _commit(frames, i, eig.frame, value, current, trace)


def _prepare(T, ranks, init):
    T = np.asarray(T, dtype=np.float64)
    frames = [as_frame(f) for f in init]
    ranks = list(ranks)
    _check_frames(T, ranks, frames)
    frames = [OrthoFrame(f.basis.copy()) for f in frames]
    return T, ranks, frames


def amm(T, ranks, init, stop: StopRule = StopRule()):
    """Cyclic alternating maximization over the modes 0, 1, ..., d-1.

    Returns ``(frames, trace)``.
    """
    T, ranks, frames = _prepare(T, ranks, init)
    trace = RunTrace()
    f = objective(T, frames)
    trace.record(f)
    trace.stop_reason = "max_iters"
    for _ in range(stop.max_iters):
        f_old = f
        for i in range(T.ndim):
            f = _mode_step(T, frames, i, ranks[i], f, trace)
        trace.record(f)
        if _relative_change(f, f_old) < stop.fit_tol:
            trace.stop_reason = "converged"
            break
    return frames, trace


def mamm(T, ranks, init, stop: StopRule = StopRule()):
    """Greedy alternating maximization: commit the single best mode update per step.

    The first step evaluates all d candidate updates; later steps skip the
    mode committed last, whose frame is already optimal for the others.
    ``trace.extra["gains"]`` holds, per step, the candidate gain of every
    evaluated mode and ``trace.extra["committed"]`` the chosen mode.
    """
    T, ranks, frames = _prepare(T, ranks, init)
    trace = RunTrace()
    f = objective(T, frames)
    trace.record(f)
    trace.extra["gains"], trace.extra["committed"] = [], []
    trace.stop_reason = "max_iters"
    last = None
    for _ in range(stop.max_iters):
        gains, cands = {}, {}
        for i in range(T.ndim):
            if i == last:
                continue
            eig, value = _best_mode_update(T, frames, i, ranks[i])
            trace.add_subproblems()
            cands[i] = (eig.frame, value)
            gains[i] = value - f
        best = max(gains, key=lambda i: (gains[i], -i))
        trace.extra["gains"].append(gains)
        f_old = f
        if gains[best] <= 0.0:
            trace.extra["committed"].append(None)
            trace.updates.append(f)
            trace.record(f)
            trace.stop_reason = "converged"
            break
        f = _commit(frames, best, cands[best][0], cands[best][1], f, trace)
        trace.extra["committed"].append(best)
        last = best
        trace.record(f)
        if _relative_change(f, f_old) < stop.fit_tol:
            trace.stop_reason = "converged"
            break
    return frames, trace


def pair_schedule(d: int) -> List[tuple]:
    """Order in which mode pairs are visited; for d = 3 this is (1,2), (0,2), (0,1)."""
    return list(reversed(list(itertools.combinations(range(d), 2))))


def two_ammv(T, ranks, init, stop: StopRule = StopRule(), inner_stop: StopRule = StopRule()):
    """Pairwise alternating maximization with each pair solved by an inner AMM.

    One outer iteration visits every pair of modes; for each pair the other
    frames are frozen and the two free frames are alternated until
    `inner_stop` fires.
    """
    T, ranks, frames = _prepare(T, ranks, init)
    trace = RunTrace()
    f = objective(T, frames)
    trace.record(f)
    trace.stop_reason = "max_iters"
    pairs = pair_schedule(T.ndim) if T.ndim > 1 else [(0,)]
    for _ in range(stop.max_iters):
        f_old = f
        for pair in pairs:
            for _ in range(inner_stop.max_iters):
                f_in = f
                for i in pair:
                    f = _mode_step(T, frames, i, ranks[i], f, trace)
                if _relative_change(f, f_in) < inner_stop.fit_tol:
                    break
        trace.record(f)
        if _relative_change(f, f_old) < stop.fit_tol:
            trace.stop_reason = "converged"
            break
    return frames, trace


def hosvd_init(T, ranks) -> List[OrthoFrame]:
    """Leading left singular subspaces of every unfolding."""
    T = np.asarray(T, dtype=np.float64)
    frames = []
    for l, r in enumerate(ranks):
        if not 1 <= r <= T.shape[l]:
            raise DimensionError(f"rank {r} out of range for mode {l} of size {T.shape[l]}")
        U, _, _ = np.linalg.svd(unfold(T, l), full_matrices=False)
        if U.shape[1] < r:  # mode size exceeds the number of columns of the unfolding
            U = np.linalg.svd(unfold(T, l), full_matrices=True)[0]
        frames.append(OrthoFrame(np.ascontiguousarray(U[:, :r])))
    return frames


def random_init(shape, ranks, seed=None) -> List[OrthoFrame]:
    """Orthonormalized standard Gaussian frames, reproducible per seed."""
    rng = np.random.default_rng(seed)
    frames = []
    for n, r in zip(shape, ranks):
        if not 1 <= r <= n:
            raise DimensionError(f"rank {r} out of range for mode size {n}")
        frames.append(orthonormalize(rng.standard_normal((n, r))))
    return frames


def random_unit_vectors(shape, seed=None) -> List[np.ndarray]:
    rng = np.random.default_rng(seed)
    out = []
    for n in shape:
        x = rng.standard_normal(n)
        out.append(x / np.linalg.norm(x))
    return out


# --- best rank-one approximation -------------------------------------------

def singular_tuple_residual(T, vectors) -> float:
    """``max_i || T x (x_j, j != i) - lambda x_i ||`` with ``lambda = f_T(x)``."""
    lam = rank_one_value(T, vectors)
    return max(
        float(np.linalg.norm(contract_except(T, vectors, [i]) - lam * vectors[i]))
        for i in range(len(vectors))
    )


def _prepare_vectors(T, init):
    T = np.asarray(T, dtype=np.float64)
    if len(init) != T.ndim:
        raise DimensionError(f"need {T.ndim} start vectors")
    xs = []
    for k, x in enumerate(init):
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.shape != (T.shape[k],):
            raise DimensionError(f"start vector {k} has length {x.size}, expected {T.shape[k]}")
        nx = np.linalg.norm(x)
        if nx == 0.0:
            raise DegenerateInputError(f"start vector {k} is zero")
        xs.append(x / nx)
    return T, xs


def _vector_step(T, xs, i, f, trace):
    v = contract_except(T, xs, [i])
    nv = float(np.linalg.norm(v))
    trace.add_subproblems()
    if nv == 0.0:
        raise DegenerateInputError(f"contraction for mode {i} vanished; choose another start")
    if _accept(nv, f):
        xs[i] = v / nv
        f = nv
    trace.updates.append(f)
    return f


def _pair_best(T, xs, pair):
    i, j = pair
    M = contract_except(T, xs, [i, j])
    U, s, Vt = np.linalg.svd(M)
    return U[:, 0], Vt[0], float(s[0])


def _pair_step(T, xs, pair, f, trace):
    u, v, s = _pair_best(T, xs, pair)
    trace.add_subproblems()
    if s == 0.0:
        raise DegenerateInputError(f"pair matrix for modes {pair} vanished; choose another start")
    if _accept(s, f):
        xs[pair[0]], xs[pair[1]] = u, v
        f = s
    trace.updates.append(f)
    return f


def rank_one_amm(T, init, stop: StopRule = StopRule()):
    """Alternating maximization of ``f_T`` over unit vectors.

    Returns ``(vectors, lambda, trace)``.
    """
    T, xs = _prepare_vectors(T, init)
    trace = RunTrace()
    f = rank_one_value(T, xs)
    trace.record(f)
    trace.stop_reason = "max_iters"
    for _ in range(stop.max_iters):
        f_old = f
        for i in range(T.ndim):
            f = _vector_step(T, xs, i, f, trace)
        trace.record(f)
        if _relative_change(f, f_old) < stop.fit_tol:
            trace.stop_reason = "converged"
            break
    return xs, f, trace


def rank_one_2amm(T, init, stop: StopRule = StopRule()):
    """Alternating SVD: maximize over pairs of vectors at a time, exactly.

    For d = 2 the single pair update is the SVD itself.
    """
    T, xs = _prepare_vectors(T, init)
    if T.ndim < 2:
        raise DimensionError("pair updates need at least two modes")
    trace = RunTrace()
    f = rank_one_value(T, xs)
    trace.record(f)
    trace.stop_reason = "max_iters"
    for _ in range(stop.max_iters):
        f_old = f
        for pair in pair_schedule(T.ndim):
            f = _pair_step(T, xs, pair, f, trace)
        trace.record(f)
        if _relative_change(f, f_old) < stop.fit_tol:
            trace.stop_reason = "converged"
            break
    return xs, f, trace


def rank_one_m2amm(T, init, stop: StopRule = StopRule()):
    """Greedy alternating SVD: commit the best pair update per step.

    ``trace.extra["gains"]`` holds the candidate gain of every evaluated
    pair per step.
    """
    T, xs = _prepare_vectors(T, init)
    if T.ndim < 2:
        raise DimensionError("pair updates need at least two modes")
    trace = RunTrace()
    f = rank_one_value(T, xs)
    trace.record(f)
    trace.extra["gains"], trace.extra["committed"] = [], []
    trace.stop_reason = "max_iters"
    pairs = list(itertools.combinations(range(T.ndim), 2))
    last = None
    for _ in range(stop.max_iters):
        gains, cands = {}, {}
        for pair in pairs:
            if pair == last:
                continue
            u, v, s = _pair_best(T, xs, pair)
            trace.add_subproblems()
            cands[pair] = (u, v, s)
            gains[pair] = s - f
        trace.extra["gains"].append(gains)
        if not gains:
            trace.stop_reason = "converged"
            break
        best = max(gains, key=lambda p: (gains[p], tuple(-x for x in p)))
        f_old = f
        if gains[best] <= 0.0:
            trace.extra["committed"].append(None)
            trace.updates.append(f)
            trace.record(f)
            trace.stop_reason = "converged"
            break
        u, v, s = cands[best]
        xs[best[0]], xs[best[1]] = u, v
        f = s
        trace.updates.append(f)
        trace.extra["committed"].append(best)
        last = best
        trace.record(f)
        if _relative_change(f, f_old) < stop.fit_tol:
            trace.stop_reason = "converged"
            break
    return xs, f, trace

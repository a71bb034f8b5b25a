"""Low-rank approximation of matrices: truncated SVD, row sampling, CUR."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import DegenerateInputError, DimensionError, SingularPivotError
from .tensor_core import index_set

PINV_RCOND = 1e-12
SIGNIFICANT_SV = 1e-8
PIVOT_COND_MAX = 1e12


@dataclass
class SvdFactors:
    u: np.ndarray  # m x r
    s: np.ndarray  # r, strictly positive, non-increasing
    vt: np.ndarray  # r x n

    @property
    def rank(self) -> int:
        return len(self.s)

    def matrix(self) -> np.ndarray:
        return (self.u * self.s) @ self.vt


def svd_rank_k(A, k: int):
    """Best rank-`k` approximation.

    Returns ``(factors, A_k, error)`` with ``error**2`` the sum of the
    squared discarded singular values.  Singular values at or below
    ``1e-12 * sigma_1`` are treated as zero and dropped from `factors`.
    """
    A = np.asarray(A, dtype=np.float64)
    if k < 1:
        raise DimensionError("k must be positive")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = min(k, int(np.sum(s > PINV_RCOND * (s[0] if s.size else 0.0))))
    factors = SvdFactors(U[:, :keep], s[:keep], Vt[:keep])
    Ak = factors.matrix()
    error = float(np.sqrt(np.sum(s[min(k, len(s)):] ** 2)))
    return factors, Ak, error


def pinv(A) -> np.ndarray:
    return np.linalg.pinv(np.asarray(A, dtype=np.float64), rcond=PINV_RCOND)


@dataclass
class RefineTrace:
    errors: List[float] = field(default_factory=list)  # ||A - B_l||
    norms: List[float] = field(default_factory=list)  # ||B_l||
    stop_reason: str = ""


def row_sample_refine(A, k: int, rows, max_rounds: int = 20, tol: float = 0.0):
    """Rank-`k` approximation seeded by the row sample `rows`, refined by alternation.

    ``B_1`` is the best rank-k approximation of the projection of every row
    of `A` onto the span of the sampled rows.  Afterwards the method
    alternates between projecting the columns of `A` onto the top-k left
    singular space of the previous iterate and projecting the rows onto the
    top-k right singular space.  Stops after `max_rounds` iterates or when
    the relative error improvement drops to `tol` or below.

    Returns ``(trace, B)``.
    """
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    rows = index_set(rows, m)
    if len(rows) < k:
        raise DegenerateInputError(f"need at least k={k} sampled rows, got {len(rows)}")
    W_u, ws, _ = np.linalg.svd(A[rows].T, full_matrices=False)
    W = W_u[:, ws > PINV_RCOND * max(ws[0], 1e-300)]
    if W.shape[1] < k:
        raise DegenerateInputError(
            f"sampled rows span a {W.shape[1]}-dimensional space, need {k}"
        )
    _, B, _ = svd_rank_k((A @ W) @ W.T, k)
    trace = RefineTrace()
    trace.errors.append(float(np.linalg.norm(A - B)))
    trace.norms.append(float(np.linalg.norm(B)))
    project_columns = True
    trace.stop_reason = "max_rounds"
    for _ in range(max_rounds - 1):
        U, s, Vt = np.linalg.svd(B, full_matrices=False)
        if project_columns:
            Uk = U[:, :k]
            B = Uk @ (Uk.T @ A)
        else:
            Vk = Vt[:k].T
            B = (A @ Vk) @ Vk.T
        project_columns = not project_columns
        err = float(np.linalg.norm(A - B))
        prev = trace.errors[-1]
        trace.errors.append(err)
        trace.norms.append(float(np.linalg.norm(B)))
        if prev - err <= tol * max(prev, 1e-300):
            trace.stop_reason = "converged"
            break
    return trace, B


@dataclass
class MatrixCurFactors:
    """``B = C @ U @ R`` with ``C = A[:, J]`` and ``R = A[I, :]``."""

    I: np.ndarray
    J: np.ndarray
    C: np.ndarray
    U: np.ndarray
    R: np.ndarray
    mode: str
    pseudo_inverse: bool = False

    def matrix(self) -> np.ndarray:
        return self.C @ self.U @ self.R

    def entry(self, i: int, j: int) -> float:
        m, n = self.C.shape[0], self.R.shape[1]
        if not (0 <= i < m and 0 <= j < n):
            raise IndexError(f"entry ({i}, {j}) out of range for {m}x{n}")
        return float(self.C[i] @ self.U @ self.R[:, j])

    @property
    def storage(self) -> int:
        return self.C.size + self.U.size + self.R.size


def _sets(A, I, J):
    m, n = A.shape
    return index_set(I, m), index_set(J, n)


def cur_optimal(A, I, J) -> MatrixCurFactors:
    """CUR with the least-squares core ``U = A[:, J]^+ A A[I, :]^+``."""
    A = np.asarray(A, dtype=np.float64)
    I, J = _sets(A, I, J)
    C, R = A[:, J], A[I, :]
    U = pinv(C) @ A @ pinv(R)
    return MatrixCurFactors(I, J, C, U, R, "optimal")


def cur_local(A, I, J, I_fit, J_fit) -> MatrixCurFactors:
    """CUR with the core fitted to the block ``A[I_fit, J_fit]`` only."""
    A = np.asarray(A, dtype=np.float64)
    I, J = _sets(A, I, J)
    I_fit, J_fit = _sets(A, I_fit, J_fit)
    U = pinv(A[np.ix_(I_fit, J)]) @ A[np.ix_(I_fit, J_fit)] @ pinv(A[np.ix_(I, J_fit)])
    return MatrixCurFactors(I, J, A[:, J], U, A[I, :], "local")


def pivot_inverse(P, what: str = "pivot block") -> np.ndarray:
    """Inverse of a square pivot block, refusing condition numbers above 1e12."""
    P = np.asarray(P, dtype=np.float64)
    if P.shape[0] != P.shape[1]:
        raise SingularPivotError(f"{what} is not square: {P.shape}")
    s = np.linalg.svd(P, compute_uv=False)
    if s[-1] == 0.0 or s[0] / s[-1] > PIVOT_COND_MAX:
        cond = np.inf if s[-1] == 0.0 else s[0] / s[-1]
        raise SingularPivotError(f"{what} is singular (condition {cond:.3e})")
    return np.linalg.inv(P)


def cur_classic(A, I, J, allow_pseudo_inverse: bool = False) -> MatrixCurFactors:
    """Skeleton approximation ``A[:, J] A[I, J]^{-1} A[I, :]``.

    A singular pivot raises :class:`SingularPivotError` unless
    `allow_pseudo_inverse` is set, in which case the Moore-Penrose inverse
    is used and the factors are flagged.
    """
    A = np.asarray(A, dtype=np.float64)
    I, J = _sets(A, I, J)
    P = A[np.ix_(I, J)]
    pseudo = False
    if len(I) != len(J):
        if not allow_pseudo_inverse:
            raise SingularPivotError(f"pivot block {P.shape} is not square")
        U, pseudo = pinv(P), True
    else:
        try:
            U = pivot_inverse(P)
        except SingularPivotError:
            if not allow_pseudo_inverse:
                raise
            U, pseudo = pinv(P), True
    return MatrixCurFactors(I, J, A[:, J], U, A[I, :], "classic", pseudo)


def pivot_score(P, objective: str = "abs-det") -> float:
    P = np.asarray(P, dtype=np.float64)
    if objective == "abs-det":
        return float(abs(np.linalg.det(P)))
    if objective == "sigma-product":
        s = np.linalg.svd(P, compute_uv=False)
        if s[0] == 0.0:
            return 0.0
        return float(np.prod(s[s >= SIGNIFICANT_SV * s[0]]))
    raise ValueError(f"unknown pivot objective {objective!r}")


def pivot_search(A, k: int, trials: int, objective: str = "abs-det", seed=None):
    """Random search for a ``k x k`` pivot block with a large score.

    Each of the `trials` draws picks `k` rows and `k` columns uniformly
    without replacement.  Returns ``(I, J, score)`` of the best draw; ties
    go to the earliest draw.
    """
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    if not 1 <= k <= min(m, n):
        raise DimensionError(f"k={k} incompatible with a {m}x{n} matrix")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(trials):
        I = np.sort(rng.choice(m, size=k, replace=False))
        J = np.sort(rng.choice(n, size=k, replace=False))
        score = pivot_score(A[np.ix_(I, J)], objective)
        if best is None or score > best[2]:
            best = (I, J, score)
    return best


def max_minor(A, k: int):
    """Exhaustive ``mu_k``: the largest ``|det A[I, J]|`` over all ``k x k`` blocks.

    Returns ``(mu, I, J)``.  Cost grows like ``C(m,k) C(n,k)``.
    """
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    rows = list(itertools.combinations(range(m), k))
    cols = np.array(list(itertools.combinations(range(n), k)))
    best = (-1.0, None, None)
    for I in rows:
        sub = A[list(I)][:, cols]  # k x ncols x k
        dets = np.abs(np.linalg.det(np.transpose(sub, (1, 0, 2))))
        j = int(np.argmax(dets))
        if dets[j] > best[0]:
            best = (float(dets[j]), np.array(I), cols[j])
    return best


def entrywise_max_norm(F) -> float:
    return float(np.max(np.abs(np.asarray(F))))


def cur_error_bound(A, I, J, mu_estimate: float) -> float:
    """``(k+1) mu / |det A[I,J]| * sigma_{k+1}(A)``, an entrywise bound on ``A - B(I,J)``."""
    A = np.asarray(A, dtype=np.float64)
    I, J = _sets(A, I, J)
    if len(I) != len(J):
        raise DimensionError("pivot block must be square")
    k = len(I)
    det = abs(np.linalg.det(A[np.ix_(I, J)]))
    if det == 0.0:
        raise SingularPivotError("pivot determinant is zero")
    s = np.linalg.svd(A, compute_uv=False)
    sigma_next = s[k] if k < len(s) else 0.0
    return float((k + 1) * mu_estimate / det * sigma_next)

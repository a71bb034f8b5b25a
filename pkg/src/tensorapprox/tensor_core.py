"""
Dense d-mode tensors as C-ordered float64 numpy arrays.

Storage order is row-major: the last index varies fastest.  Every
unfolding below derives its column order from that one convention, so
an unfolding's columns enumerate the remaining modes in increasing mode
order with the last listed mode varying fastest.

Modes are numbered from 0.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DimensionError


def as_tensor(data) -> np.ndarray:
    """Return `data` as a C-contiguous float64 array with at least one mode."""
    T = np.asarray(data, dtype=np.float64)
    if T.ndim < 1:
        raise DimensionError("a tensor needs at least one mode")
    if any(n < 1 for n in T.shape):
        raise DimensionError(f"every mode must have size >= 1, got {T.shape}")
    return np.ascontiguousarray(T)


def index_set(indices, n: int) -> np.ndarray:
    """Validate a strictly increasing, non-empty index set within ``range(n)``."""
    idx = np.asarray(indices, dtype=np.intp).ravel()
    if idx.size == 0:
        raise DimensionError("index set is empty")
    if np.any(np.diff(idx) <= 0):
        raise DimensionError(f"index set must be strictly increasing: {idx.tolist()}")
    if idx[0] < 0 or idx[-1] >= n:
        raise DimensionError(f"index set {idx.tolist()} out of range for size {n}")
    return idx


def _check_mode(T: np.ndarray, mode: int) -> int:
    if not 0 <= mode < T.ndim:
        raise DimensionError(f"mode {mode} out of range for a {T.ndim}-mode tensor")
    return mode


def inner(S, T) -> float:
    """Standard inner product of two tensors of identical shape."""
    S = np.asarray(S, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if S.shape != T.shape:
        raise DimensionError(f"shape mismatch: {S.shape} vs {T.shape}")
    return float(np.dot(S.ravel(), T.ravel()))


def hs_norm(T) -> float:
    """Hilbert-Schmidt (Frobenius) norm."""
    return float(np.linalg.norm(np.asarray(T, dtype=np.float64).ravel()))


def contract(T, X, modes: Sequence[int]):
    """Contract `T` with `X` over `modes`.

    ``X.shape`` must equal ``T.shape`` restricted to `modes` (taken in
    increasing order).  The result lives on the remaining modes, in their
    original order.  Contracting over every mode returns a float.
    """
    T = np.asarray(T, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    modes = [int(m) for m in modes]
    if not modes or any(b <= a for a, b in zip(modes, modes[1:])):
        raise DimensionError(f"modes must be non-empty and strictly increasing: {modes}")
    if modes[0] < 0 or modes[-1] >= T.ndim:
        raise DimensionError(f"modes {modes} out of range for a {T.ndim}-mode tensor")
    expected = tuple(T.shape[m] for m in modes)
    if X.shape != expected:
        raise DimensionError(f"contraction operand has shape {X.shape}, expected {expected}")
    out = np.tensordot(T, X, axes=(modes, list(range(len(modes)))))
    if out.ndim == 0:
        return float(out)
    return out


def mode_product(T, M, mode: int) -> np.ndarray:
    """Multiply mode `mode` of `T` by the matrix `M` (``M @ fiber`` for every fiber)."""
    T = np.asarray(T, dtype=np.float64)
    out = np.tensordot(M, T, axes=(1, mode))
    return np.moveaxis(out, 0, mode)


def multi_mode_product(T, matrices, skip=()) -> np.ndarray:
    """Apply ``matrices[k]`` along every mode k not in `skip`; ``None`` entries are skipped."""
    out = np.asarray(T, dtype=np.float64)
    for k, M in enumerate(matrices):
        if k in skip or M is None:
            continue
        out = mode_product(out, M, k)
    return out


def unfold(T, mode: int) -> np.ndarray:
    """Mode-`mode` unfolding, shape ``(n_mode, N / n_mode)``."""
    T = np.asarray(T, dtype=np.float64)
    _check_mode(T, mode)
    return np.moveaxis(T, mode, 0).reshape(T.shape[mode], -1)


def fold(M, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    shape = tuple(shape)
    rest = shape[:mode] + shape[mode + 1:]
    full = np.asarray(M, dtype=np.float64).reshape((shape[mode],) + rest)
    return np.ascontiguousarray(np.moveaxis(full, 0, mode))


def _check_partition(d: int, K, L):
    K, L = list(K), list(L)
    if not K or not L:
        raise DimensionError("both mode groups must be non-empty")
    if sorted(K + L) != list(range(d)):
        raise DimensionError(f"{K} and {L} do not partition the {d} modes")
    return sorted(K), sorted(L)


def unfold_bipartite(T, K, L) -> np.ndarray:
    """Unfold into rows indexed by the modes in `K` and columns by those in `L`.

    Both groups are taken in increasing mode order with the last mode of
    each group varying fastest.
    """
    T = np.asarray(T, dtype=np.float64)
    K, L = _check_partition(T.ndim, K, L)
    rows = int(np.prod([T.shape[k] for k in K]))
    return np.transpose(T, K + L).reshape(rows, -1)


def fold_bipartite(M, K, L, shape: Sequence[int]) -> np.ndarray:
    shape = tuple(shape)
    K, L = _check_partition(len(shape), K, L)
    perm = K + L
    full = np.asarray(M, dtype=np.float64).reshape([shape[p] for p in perm])
    return np.ascontiguousarray(np.transpose(full, np.argsort(perm)))


def _bases(frames):
    # accept OrthoFrame-like objects or plain matrices
    return [np.asarray(getattr(f, "basis", f), dtype=np.float64) for f in frames]


def project(T, frames):
    """Orthogonal projection of `T` onto the tensor product of the frames' spans.

    Returns ``(core, projection)`` where ``core`` has shape ``(r_1, ..., r_d)``
    and holds the coordinates of the projection in the product basis.
    """
    T = np.asarray(T, dtype=np.float64)
    bases = _bases(frames)
    if len(bases) != T.ndim:
        raise DimensionError(f"need {T.ndim} frames, got {len(bases)}")
    for k, U in enumerate(bases):
        if U.ndim != 2 or U.shape[0] != T.shape[k] or U.shape[1] > U.shape[0]:
            raise DimensionError(f"frame {k} has shape {U.shape}, ambient size {T.shape[k]}")
    core = multi_mode_product(T, [U.T for U in bases])
    projection = multi_mode_product(core, bases)
    return core, projection


def projection_norm2(T, frames) -> float:
    """Squared norm of the projection, computed as the squared norm of the core."""
    T = np.asarray(T, dtype=np.float64)
    core = multi_mode_product(T, [U.T for U in _bases(frames)])
    return float(np.dot(core.ravel(), core.ravel()))


def rank_one_value(T, vectors) -> float:
    """``<T, x_1 (x) ... (x) x_d>``."""
    T = np.asarray(T, dtype=np.float64)
    if len(vectors) != T.ndim:
        raise DimensionError(f"need {T.ndim} vectors, got {len(vectors)}")
    out = T
    for k in reversed(range(T.ndim)):
        x = np.asarray(vectors[k], dtype=np.float64)
        if x.shape != (T.shape[k],):
            raise DimensionError(f"vector {k} has shape {x.shape}, expected ({T.shape[k]},)")
        out = out @ x
    return float(out)


def contract_except(T, vectors, keep: Sequence[int]) -> np.ndarray:
    """Contract every mode not in `keep` with the matching vector.

    ``vectors[k]`` is ignored for k in `keep`.  The result keeps the modes
    in `keep` in increasing order.
    """
    out = np.asarray(T, dtype=np.float64)
    keep = set(keep)
    for k in reversed(range(out.ndim)):
        if k in keep:
            continue
        out = np.tensordot(out, np.asarray(vectors[k], dtype=np.float64), axes=(k, 0))
    return out


def outer(*vectors) -> np.ndarray:
    """Rank-one tensor ``x_1 (x) ... (x) x_d``."""
    out = np.asarray(vectors[0], dtype=np.float64)
    for v in vectors[1:]:
        out = np.multiply.outer(out, np.asarray(v, dtype=np.float64))
    return out


def tucker_to_tensor(core, factors) -> np.ndarray:
    return multi_mode_product(core, factors)

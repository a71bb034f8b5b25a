"""
Orthonormal frames and the affine charts of products of Grassmannians.

A chart is anchored at a tuple of frames whose completions are known.
The chart point ``X = [X_1, ..., X_d]`` with ``X_i`` of shape
``(n_i - r_i, r_i)`` stands for the subspaces spanned by
``basis_i + completion_i @ X_i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, DimensionError, OutOfChartError

# smallest/largest singular value ratio of Y below which a subspace is out of chart
CHART_TOL = 1e-10


@dataclass(frozen=True)
class OrthoFrame:
    """An ``n x r`` matrix with orthonormal columns, optionally with its completion."""

    basis: np.ndarray
    completion: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def r(self) -> int:
        return self.basis.shape[1]

    @property
    def full(self) -> np.ndarray:
        """``[basis | completion]``, an orthogonal ``n x n`` matrix."""
        if self.completion is None:
            raise ValueError("frame has no completion; call complete() first")
        return np.hstack([self.basis, self.completion])

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


SubspaceTuple = List[OrthoFrame]
ChartPoint = List[np.ndarray]


def orthonormalize(vectors, tol: float = 1e-12) -> OrthoFrame:
    """Gram-Schmidt orthonormalization of the columns of `vectors`.

    Computed through Householder QR with the sign of each column fixed so
    that ``R`` has a positive diagonal, which reproduces Gram-Schmidt
    exactly: the first output column is the normalized first input column.
    """
    V = np.asarray(vectors, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    n, r = V.shape
    if r > n or r == 0:
        raise DimensionError(f"cannot orthonormalize {r} vectors in R^{n}")
    Q, R = np.linalg.qr(V)
    diag = np.diag(R)
    scale = np.max(np.abs(diag)) if r else 0.0
    if scale == 0.0 or np.min(np.abs(diag)) <= tol * max(scale, np.linalg.norm(V, 2)):
        raise DegenerateInputError("input columns are numerically linearly dependent")
    Q = Q * np.sign(diag)
    return OrthoFrame(np.ascontiguousarray(Q))


def as_frame(frame) -> OrthoFrame:
    if isinstance(frame, OrthoFrame):
        return frame
    return OrthoFrame(np.asarray(frame, dtype=np.float64))


def complete(frame) -> OrthoFrame:
    """Attach an orthonormal basis of the orthogonal complement."""
    frame = as_frame(frame)
    if frame.completion is not None:
        return frame
    n, r = frame.basis.shape
    if r == n:
        return OrthoFrame(frame.basis, np.zeros((n, 0)))
    Q, _ = np.linalg.qr(frame.basis, mode="complete")
    comp = Q[:, r:]
    # one reorthogonalization pass against the basis keeps the 1e-12 invariant
    comp = comp - frame.basis @ (frame.basis.T @ comp)
    comp, _ = np.linalg.qr(comp)
    # deterministic signs: the largest-magnitude entry of each column is positive
    idx = np.argmax(np.abs(comp), axis=0)
    comp = comp * np.sign(comp[idx, np.arange(comp.shape[1])])
    return OrthoFrame(frame.basis, np.ascontiguousarray(comp))


def complete_all(frames) -> SubspaceTuple:
    return [complete(f) for f in frames]


def chart_dims(frames) -> List[int]:
    """Number of chart coordinates per mode, ``(n_i - r_i) * r_i``."""
    return [(f.n - f.r) * f.r for f in map(as_frame, frames)]


def chart_zero(anchor) -> ChartPoint:
    return [np.zeros((f.n - f.r, f.r)) for f in map(as_frame, anchor)]


def flatten_chart(X: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate the row-major flattening of each block."""
    return np.concatenate([np.asarray(b, dtype=np.float64).ravel() for b in X])


def unflatten_chart(x, anchor) -> ChartPoint:
    expected = sum(chart_dims(anchor))
    if len(x) != expected:
        raise DimensionError(f"chart vector has length {len(x)}, expected {expected}")
    blocks, pos = [], 0
    for f in map(as_frame, anchor):
        size = (f.n - f.r) * f.r
        blocks.append(np.asarray(x[pos:pos + size], dtype=np.float64).reshape(f.n - f.r, f.r))
        pos += size
    return blocks


def chart_to_tuple(anchor, X) -> SubspaceTuple:
    """Map a chart point to orthonormal frames."""
    if len(anchor) != len(X):
        raise DimensionError("chart point and anchor have different numbers of modes")
    out = []
    for f, Xi in zip(anchor, X):
        Xi = np.asarray(Xi, dtype=np.float64)
        if f.completion is None:
            raise ValueError("anchor frames need completions")
        if Xi.shape != (f.n - f.r, f.r):
            raise DimensionError(f"chart block has shape {Xi.shape}, expected {(f.n - f.r, f.r)}")
        if not Xi.size or not np.any(Xi):
            out.append(OrthoFrame(f.basis))
            continue
        out.append(orthonormalize(f.basis + f.completion @ Xi))
    return out


def chart_coordinates(anchor_frame: OrthoFrame, basis) -> tuple:
    """Split ``[anchor full basis]^T @ basis`` into ``(block, Y, X)`` with ``block = X Y^{-1}``."""
    Z = anchor_frame.full.T @ np.asarray(basis, dtype=np.float64)
    r = anchor_frame.r
    Y, Xc = Z[:r], Z[r:]
    s = np.linalg.svd(Y, compute_uv=False)
    if s[-1] < CHART_TOL * max(s[0], 1.0):
        raise OutOfChartError(
            "subspace meets the anchor's orthogonal complement "
            f"(sigma_min(Y) = {s[-1]:.3e})"
        )
    block = np.linalg.solve(Y.T, Xc.T).T
    return block, Y, Xc


def tuple_to_chart(anchor, target):
    """Chart coordinates of `target` relative to `anchor`.

    Returns ``(X, Ys, Xs)`` where ``X`` is the chart point and ``Ys``/``Xs``
    are the per-mode top and bottom blocks of ``[anchor full]^T @ target``.
    """
    if len(anchor) != len(target):
        raise DimensionError("anchor and target have different numbers of modes")
    X, Ys, Xs = [], [], []
    for a, t in zip(anchor, target):
        t = as_frame(t)
        if t.basis.shape != a.basis.shape:
            raise DimensionError(f"target frame shape {t.basis.shape} != anchor {a.basis.shape}")
        block, Y, Xc = chart_coordinates(a, t.basis)
        X.append(block)
        Ys.append(Y)
        Xs.append(Xc)
    return X, Ys, Xs


def principal_angle_distance(A, B) -> float:
    """``||sin Theta||`` between the column spans of two frames.

    Evaluated as ``||(I - A A^T) B||_F``, which is accurate for nearly
    equal subspaces where ``1 - cos^2`` would cancel.
    """
    A = as_frame(A).basis
    B = as_frame(B).basis
    if A.shape != B.shape:
        raise DimensionError(f"frame shapes differ: {A.shape} vs {B.shape}")
    return float(np.linalg.norm(B - A @ (A.T @ B)))


def tuple_distance(U, V) -> float:
    return float(np.sqrt(sum(principal_angle_distance(a, b) ** 2 for a, b in zip(U, V))))

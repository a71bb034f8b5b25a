"""
CUR-type approximations of 3- and 4-mode tensors built from nested matrix CUR.

d = 3: the mode-1 unfolding is approximated by a skeleton on rows ``I1``
(``|I1| = k^2``) and columns ``J = I2 x I3``; every sampled row, viewed as
an ``n2 x n3`` slice, is in turn replaced by its own skeleton on
``(I2, I3)``.

d = 4: the ``(12 | 34)`` unfolding is approximated on ``J1 = I1 x I2`` and
``J2 = I3 x I4``; each sampled column and row, viewed as an ``n1 x n2``
resp. ``n3 x n4`` slice, is replaced by its own skeleton.

Only the sampled fibers and the inverse pivot blocks are stored.  Index
sets are chosen by the caller, e.g. with ``matrix_approx.pivot_search``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .matrix_approx import pivot_inverse
from .tensor_core import index_set


@dataclass
class Cur3Factors:
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray
    shape: tuple
    fibers: np.ndarray  # (n1, k, k): T[i1, a2, a3]
    col_slices: np.ndarray  # (k^2, n2, k): T[a1, i2, b3]
    row_slices: np.ndarray  # (k^2, k, n3): T[a1, b2, i3]
    F: np.ndarray  # (k^2, k, k): F[a1, a2, a3] = inv(T1[I1, J])[(a2, a3), a1]
    G: np.ndarray  # (k^2, k, k): G[a1, b2, b3] = inv(Q(a1)[I2, I3])[b3, b2]

    @property
    def k(self) -> int:
        return len(self.I2)

    @property
    def storage(self) -> int:
        """Number of stored reals, ``k^2 n1 + k^3 (n2 + n3) + 2 k^4``."""
        return self.fibers.size + self.col_slices.size + self.row_slices.size + self.F.size + self.G.size

    def entry(self, i1: int, i2: int, i3: int) -> float:
        n1, n2, n3 = self.shape
        if not (0 <= i1 < n1 and 0 <= i2 < n2 and 0 <= i3 < n3):
            raise IndexError(f"entry {(i1, i2, i3)} out of range for shape {self.shape}")
        left = np.einsum("bc,abc->a", self.fibers[i1], self.F)
        mid = np.einsum("ac,abc,ab->a", self.col_slices[:, i2, :], self.G, self.row_slices[:, :, i3])
        return float(left @ mid)

    def block(self, rows=None, cols=None, tubes=None) -> np.ndarray:
        """Evaluate ``B[rows][:, cols][:, :, tubes]`` sharing the small contractions."""
        n1, n2, n3 = self.shape
        rows = np.arange(n1) if rows is None else np.asarray(rows)
        cols = np.arange(n2) if cols is None else np.asarray(cols)
        tubes = np.arange(n3) if tubes is None else np.asarray(tubes)
        left = np.einsum("ibc,abc->ia", self.fibers[rows], self.F)
        R = np.einsum("ajc,abc,abk->ajk", self.col_slices[:, cols, :], self.G,
                      self.row_slices[:, :, tubes])
        return np.einsum("ia,ajk->ijk", left, R)

    def to_dense(self) -> np.ndarray:
        return self.block()


def cur3_build(T, I1, I2, I3, k: int) -> Cur3Factors:
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 3:
        raise DimensionError(f"cur3 needs a 3-mode tensor, got {T.ndim} modes")
    n1, n2, n3 = T.shape
    I1, I2, I3 = index_set(I1, n1), index_set(I2, n2), index_set(I3, n3)
    if len(I1) != k * k or len(I2) != k or len(I3) != k:
        raise DimensionError(f"need |I1| = k^2 = {k * k} and |I2| = |I3| = k = {k}")
    fibers = T[:, I2][:, :, I3]  # (n1, k, k), columns (a2, a3) in lexicographic order
    pivot = fibers[I1].reshape(k * k, k * k)  # rows a1, columns (a2, a3)
    F = pivot_inverse(pivot, "mode-1 pivot T1[I1, I2 x I3]").T.reshape(k * k, k, k)
    col_slices = T[I1][:, :, I3]  # (k^2, n2, k)
    row_slices = T[I1][:, I2, :]  # (k^2, k, n3)
    G = np.empty((k * k, k, k))
    for a, a1 in enumerate(I1):
        Q = row_slices[a][:, I3]  # Q(a1)[I2, I3]
        G[a] = pivot_inverse(Q, f"slice pivot Q({a1})[I2, I3]").T
    return Cur3Factors(I1, I2, I3, T.shape, fibers, col_slices, row_slices, F, G)


@dataclass
class Cur4Factors:
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray
    I4: np.ndarray
    shape: tuple
    A1: np.ndarray  # (n1, k, k, k): T[i1, b2, a3, a4]
    A2: np.ndarray  # (k, n2, k, k): T[b1, i2, a3, a4]
    A3: np.ndarray  # (k, k, n3, k): T[a1, a2, i3, b4]
    A4: np.ndarray  # (k, k, k, n4): T[a1, a2, b3, i4]
    F: np.ndarray  # F[b1, b2, a3, a4] = inv(T[I1, I2, a3, a4])[b2, b1]
    G: np.ndarray  # G[a1, a2, b3, b4] = inv(T[a1, a2, I3, I4])[b4, b3]
    H: np.ndarray  # H[a1, a2, a3, a4] = inv(X[J1, J2])[(a3, a4), (a1, a2)]

    @property
    def k(self) -> int:
        return len(self.I1)

    @property
    def storage(self) -> int:
        """Number of stored reals, ``k^3 (n1 + n2 + n3 + n4 + 3k)``."""
        return sum(a.size for a in (self.A1, self.A2, self.A3, self.A4, self.F, self.G, self.H))

    def entry(self, i1: int, i2: int, i3: int, i4: int) -> float:
        idx = (i1, i2, i3, i4)
        if any(not 0 <= i < n for i, n in zip(idx, self.shape)):
            raise IndexError(f"entry {idx} out of range for shape {self.shape}")
        left = np.einsum("ycd,xycd,xcd->cd", self.A1[i1], self.F, self.A2[:, i2])
        right = np.einsum("aby,abzy,abz->ab", self.A3[:, :, i3], self.G, self.A4[:, :, :, i4])
        return float(np.einsum("cd,abcd,ab->", left, self.H, right))

    def block(self, idx1=None, idx2=None, idx3=None, idx4=None) -> np.ndarray:
        sel = [np.arange(n) if s is None else np.asarray(s)
               for s, n in zip((idx1, idx2, idx3, idx4), self.shape)]
        # Y-skeletons: left[i1, i2, a3, a4]
        left = np.einsum("iycd,xycd,xjcd->ijcd", self.A1[sel[0]], self.F, self.A2[:, sel[1]],
                         optimize=True)
        # Z-skeletons: right[a1, a2, i3, i4]
        right = np.einsum("abky,abzy,abzl->abkl", self.A3[:, :, sel[2]], self.G,
                          self.A4[:, :, :, sel[3]], optimize=True)
        return np.einsum("ijcd,abcd,abkl->ijkl", left, self.H, right, optimize=True)

    def to_dense(self) -> np.ndarray:
        return self.block()


def cur4_build(T, I1, I2, I3, I4, k: int) -> Cur4Factors:
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 4:
        raise DimensionError(f"cur4 needs a 4-mode tensor, got {T.ndim} modes")
    sets = [index_set(I, n) for I, n in zip((I1, I2, I3, I4), T.shape)]
    if any(len(I) != k for I in sets):
        raise DimensionError(f"every index set must have size k = {k}")
    I1, I2, I3, I4 = sets
    A1 = T[:, I2][:, :, I3][:, :, :, I4]
    A2 = T[I1][:, :, I3][:, :, :, I4]
    A3 = T[I1][:, I2][:, :, :, I4]
    A4 = T[I1][:, I2][:, :, I3]
    core = A1[I1]  # T[I1, I2, I3, I4]
    X = core.reshape(k * k, k * k)  # rows (a1, a2), columns (a3, a4)
    H = pivot_inverse(X, "pivot X[I1 x I2, I3 x I4]").T.reshape(k, k, k, k)
    F = np.empty((k, k, k, k))
    G = np.empty((k, k, k, k))
    for c in range(k):
        for d in range(k):
            Y = core[:, :, c, d]
            F[:, :, c, d] = pivot_inverse(Y, f"slice pivot Y({I3[c]}, {I4[d]})[I1, I2]").T
    for a in range(k):
        for b in range(k):
            Z = core[a, b]
            G[a, b] = pivot_inverse(Z, f"slice pivot Z({I1[a]}, {I2[b]})[I3, I4]").T
    return Cur4Factors(I1, I2, I3, I4, T.shape, A1, A2, A3, A4, F, G, H)

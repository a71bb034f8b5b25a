"""Text and binary tensor containers.

Text:   ``TNSR d n1 ... nd`` header line, then N floats in storage order.
Binary: magic ``b"TNSR1"``, uint32 d, d uint32 dims, N little-endian float64.
Matrices are the d = 2 case.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .errors import DimensionError

MAGIC = b"TNSR1"


def _check_shape(shape):
    if len(shape) < 1 or any(n < 1 for n in shape):
        raise DimensionError(f"invalid tensor shape {shape}")


def dumps_text(T) -> str:
    T = np.ascontiguousarray(T, dtype=np.float64)
    header = "TNSR %d %s" % (T.ndim, " ".join(str(n) for n in T.shape))
    body = " ".join(repr(float(x)) for x in T.ravel())
    return header + "\n" + body + "\n"


def loads_text(text: str) -> np.ndarray:
    lines = text.lstrip().split("\n", 1)
    head = lines[0].split()
    if not head or head[0] != "TNSR":
        raise DimensionError("missing TNSR header")
    try:
        d = int(head[1])
        shape = tuple(int(n) for n in head[2:])
    except (IndexError, ValueError) as exc:
        raise DimensionError(f"malformed header: {lines[0]!r}") from exc
    if len(shape) != d:
        raise DimensionError(f"header declares {d} modes but lists {len(shape)} sizes")
    _check_shape(shape)
    body = lines[1].split() if len(lines) > 1 else []
    N = int(np.prod(shape))
    if len(body) != N:
        raise DimensionError(f"expected {N} values, found {len(body)}")
    return np.array([float(x) for x in body], dtype=np.float64).reshape(shape)


def dumps_binary(T) -> bytes:
    T = np.ascontiguousarray(T, dtype=np.float64)
    head = MAGIC + struct.pack("<I", T.ndim) + struct.pack("<%dI" % T.ndim, *T.shape)
    return head + T.astype("<f8").tobytes()


def read_binary(stream) -> np.ndarray:
    """Read one binary tensor from a file-like object positioned at its magic."""
    magic = stream.read(len(MAGIC))
    if magic != MAGIC:
        raise DimensionError("bad magic, not a TNSR1 container")
    raw = stream.read(4)
    if len(raw) != 4:
        raise DimensionError("truncated header")
    (d,) = struct.unpack("<I", raw)
    raw = stream.read(4 * d)
    if len(raw) != 4 * d:
        raise DimensionError("truncated header")
    shape = struct.unpack("<%dI" % d, raw)
    _check_shape(shape)
    N = int(np.prod(shape))
    raw = stream.read(8 * N)
    if len(raw) != 8 * N:
        raise DimensionError(f"expected {N} values, found {len(raw) // 8}")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


def loads_binary(data: bytes) -> np.ndarray:
    stream = io.BytesIO(data)
    T = read_binary(stream)
    if stream.read(1):
        raise DimensionError("trailing bytes after tensor data")
    return T


def save(path, T, binary: bool | None = None) -> None:
    """Write `T`; the format follows the suffix (``.tnsr`` text, anything else binary) unless given."""
    path = Path(path)
    if binary is None:
        binary = path.suffix != ".tnsr" and path.suffix != ".txt"
    if binary:
        path.write_bytes(dumps_binary(T))
    else:
        path.write_text(dumps_text(T))


def load(path) -> np.ndarray:
    """Read a tensor in either format, sniffing the magic bytes."""
    data = Path(path).read_bytes()
    if data.startswith(MAGIC):
        return loads_binary(data)
    return loads_text(data.decode("utf-8"))


# CUR factors: one manifest line, then each stored block as a binary container.

_CUR_BLOCKS = {
    "cur3": ("fibers", "col_slices", "row_slices", "F", "G"),
    "cur4": ("A1", "A2", "A3", "A4", "F", "G", "H"),
}


def dumps_cur(factors) -> bytes:
    from .tensor_cur import Cur3Factors

    kind = "cur3" if isinstance(factors, Cur3Factors) else "cur4"
    d = 3 if kind == "cur3" else 4
    sets = [getattr(factors, f"I{m + 1}") for m in range(d)]
    fields = [kind, "shape=" + ",".join(map(str, factors.shape))]
    fields += [f"I{m + 1}=" + ",".join(str(int(i)) for i in I) for m, I in enumerate(sets)]
    out = [(" ".join(fields) + "\n").encode("ascii")]
    out += [dumps_binary(getattr(factors, name)) for name in _CUR_BLOCKS[kind]]
    return b"".join(out)


def loads_cur(data: bytes):
    from .tensor_cur import Cur3Factors, Cur4Factors

    head, sep, rest = data.partition(b"\n")
    if not sep:
        raise DimensionError("missing CUR manifest line")
    fields = head.decode("ascii").split()
    kind = fields[0] if fields else ""
    if kind not in _CUR_BLOCKS:
        raise DimensionError(f"unknown CUR kind {kind!r}")
    try:
        meta = dict(f.split("=", 1) for f in fields[1:])
        shape = tuple(int(n) for n in meta["shape"].split(","))
        sets = [np.array([int(i) for i in meta[f"I{m + 1}"].split(",")]) for m in range(len(shape))]
    except (KeyError, ValueError) as exc:
        raise DimensionError(f"malformed CUR manifest: {head!r}") from exc
    stream = io.BytesIO(rest)
    blocks = [read_binary(stream) for _ in _CUR_BLOCKS[kind]]
    if stream.read(1):
        raise DimensionError("trailing bytes after CUR blocks")
    cls = Cur3Factors if kind == "cur3" else Cur4Factors
    return cls(*sets, shape, *blocks)

"""Binary and CSV export of matrices.

Binary layout (little-endian)::

    magic   7 bytes  b"LAPRMT1"
    kind    uint8    0 = Laplacian off-diagonal, strict lower triangle
                     1 = symmetric matrix, lower triangle with diagonal
                     2 = general matrix, row-major
    law     uint8    entry-law tag (see ensemble.LAW_TAGS)
    rows    uint64
    cols    uint64
    seed    uint64
    payload float64 values, row-major over the stored triangle or matrix
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .ensemble import LAW_TAGS, LaplacianSample

MAGIC = b"LAPRMT1"
HEADER = struct.Struct("<7sBBQQQ")
KIND_LAPLACIAN, KIND_SYMMETRIC, KIND_GENERAL = 0, 1, 2
_TAG_LAWS = {v: k for k, v in LAW_TAGS.items()}


def _pack(kind: int, law: int, rows: int, cols: int, seed: int, values: np.ndarray) -> bytes:
    head = HEADER.pack(MAGIC, kind, law, rows, cols, int(seed) & ((1 << 64) - 1))
    return head + np.ascontiguousarray(values, dtype="<f8").tobytes()


def to_bytes(obj, seed: int = 0) -> bytes:
    """Serialize a LaplacianSample, a symmetric matrix or a general matrix."""
    if isinstance(obj, LaplacianSample):
        il = np.tril_indices(obj.size, -1)
        return _pack(KIND_LAPLACIAN, LAW_TAGS.get(obj.law, 4), obj.size, obj.size, obj.seed,
                     obj.offdiag[il])
    a = np.asarray(obj, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-d array")
    if a.shape[0] == a.shape[1] and np.array_equal(a, a.T):
        il = np.tril_indices(a.shape[0])
        return _pack(KIND_SYMMETRIC, LAW_TAGS["matrix"], a.shape[0], a.shape[1], seed, a[il])
    return _pack(KIND_GENERAL, LAW_TAGS["matrix"], a.shape[0], a.shape[1], seed, a.ravel())


def from_bytes(buf: bytes):
    """Inverse of :func:`to_bytes`; returns a LaplacianSample or an array."""
    if len(buf) < HEADER.size:
        raise ValueError("truncated container header")
    magic, kind, law, rows, cols, seed = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    vals = np.frombuffer(buf, dtype="<f8", offset=HEADER.size).astype(np.float64)
    if kind == KIND_GENERAL:
        if vals.size != rows * cols:
            raise ValueError("payload size mismatch")
        return vals.reshape(rows, cols)
    if rows != cols:
        raise ValueError("triangular payload needs a square matrix")
    il = np.tril_indices(rows, -1 if kind == KIND_LAPLACIAN else 0)
    if vals.size != il[0].size:
        raise ValueError("payload size mismatch")
    m = np.zeros((rows, rows))
    m[il] = vals
    m = m + np.tril(m, -1).T
    if kind == KIND_LAPLACIAN:
        return LaplacianSample(m, seed, _TAG_LAWS.get(law, "matrix"))
    if kind == KIND_SYMMETRIC:
        return m
    raise ValueError(f"unknown container kind {kind}")


def save(path, obj, seed: int = 0) -> None:
    Path(path).write_bytes(to_bytes(obj, seed))


def load(path):
    return from_bytes(Path(path).read_bytes())


def write_matrix_csv(path, obj) -> None:
    a = obj.matrix if isinstance(obj, LaplacianSample) else np.asarray(obj)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in a:
            w.writerow([repr(float(x)) for x in row])


def write_rows_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)

"""Reader and writer for DPMF, a minimal binary container for dense arrays.

Layout (all integers and floats little-endian)::

    b"DPMF"                 magic, 4 bytes
    0x01                    format version, 1 byte
    rank                    1 byte
    flag                    1 byte, 1 for complex data and 0 for real
    shape[0..rank-1]        unsigned 64-bit integers
    data                    IEEE-754 doubles in row-major order;
                            complex entries are stored as (re, im) pairs

Every double is written bit-for-bit, so a read returns exactly the array
that was written.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"DPMF"
VERSION = 1
_HEADER = struct.Struct("<4sBBB")
_DIM = struct.Struct("<Q")


class DPMFError(ValueError):
    """Malformed or unsupported DPMF data."""


def encode(array) -> bytes:
    a = np.asarray(array)
    if a.dtype.kind not in "biufc":
        raise DPMFError(f"cannot store dtype {a.dtype} in DPMF")
    if a.ndim > 255:
        raise DPMFError("rank exceeds 255")
    is_complex = a.dtype.kind == "c"
    data = np.ascontiguousarray(a, dtype="<c16" if is_complex else "<f8")
    head = _HEADER.pack(MAGIC, VERSION, a.ndim, int(is_complex))
    dims = b"".join(_DIM.pack(d) for d in a.shape)
    return head + dims + data.tobytes(order="C")


def decode(buf: bytes) -> np.ndarray:
    if len(buf) < _HEADER.size:
        raise DPMFError("truncated header")
    magic, version, rank, flag = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise DPMFError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DPMFError(f"unsupported DPMF version {version}")
    if flag not in (0, 1):
        raise DPMFError(f"bad complex flag {flag}")
    off = _HEADER.size
    if len(buf) < off + rank * _DIM.size:
        raise DPMFError("truncated dimension table")
    shape = tuple(_DIM.unpack_from(buf, off + i * _DIM.size)[0] for i in range(rank))
    off += rank * _DIM.size
    dtype = np.dtype("<c16" if flag else "<f8")
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    if len(buf) - off != count * dtype.itemsize:
        raise DPMFError(
            f"payload holds {len(buf) - off} bytes, expected {count * dtype.itemsize}"
        )
    return np.frombuffer(buf, dtype=dtype, count=count, offset=off).reshape(shape).copy()


def write(path: str | os.PathLike, array) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(array))


def read(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode(fh.read())

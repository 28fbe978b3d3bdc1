"""Shared little-endian binary container for named float32 tensors.

Layout: a table of (name, shape, dtype) records followed by the raw tensor
bytes in table order. Used by checkpoint, model, and dataset sample files.
"""

from __future__ import annotations

import struct

import numpy as np

_DTYPE_F32 = 0
_DTYPE_U32 = 1

_DTYPES = {_DTYPE_F32: "<f4", _DTYPE_U32: "<u4"}


def pack_tensor_table(tensors: dict[str, np.ndarray]) -> bytes:
    """Serialize named arrays (f32 for floats, u32 for integer arrays)."""
    header = [struct.pack("<I", len(tensors))]
    blobs = []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if np.issubdtype(arr.dtype, np.integer):
            code, dt = _DTYPE_U32, "<u4"
        else:
            code, dt = _DTYPE_F32, "<f4"
        data = np.ascontiguousarray(arr, dtype=dt)
        nb = name.encode("utf-8")
        header.append(struct.pack("<H", len(nb)))
        header.append(nb)
        header.append(struct.pack("<BB", code, data.ndim))
        header.append(struct.pack(f"<{data.ndim}I", *data.shape))
        blobs.append(data.tobytes())
    return b"".join(header) + b"".join(blobs)


def unpack_tensor_table(buf: bytes, offset: int = 0) -> tuple[dict[str, np.ndarray], int]:
    """Parse a tensor table; returns (tensors, offset past the table)."""
    (count,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    entries = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", buf, offset)
        offset += 2
        name = buf[offset : offset + nlen].decode("utf-8")
        offset += nlen
        code, ndim = struct.unpack_from("<BB", buf, offset)
        offset += 2
        shape = struct.unpack_from(f"<{ndim}I", buf, offset)
        offset += 4 * ndim
        entries.append((name, code, shape))
    tensors: dict[str, np.ndarray] = {}
    for name, code, shape in entries:
        dt = _DTYPES[code]
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4
        arr = np.frombuffer(buf[offset : offset + nbytes], dtype=dt).reshape(shape)
        offset += nbytes
        if code == _DTYPE_F32:
            tensors[name] = arr.astype(np.float64)
        else:
            tensors[name] = arr.astype(np.int64)
    return tensors, offset

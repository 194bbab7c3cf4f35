"""Binary tensor records and the checkpoint container.

Tensor record::

    b"PDCT" | u8 version=1 | u8 dtype (1=f32, 2=f64, 3=u8) | u8 ndim
    | ndim x u32 LE dims | payload, little-endian row-major

Checkpoint::

    b"PDCC" | u8 version=1 | u32 LE entry count
    | per entry: u16 LE name length, UTF-8 name, tensor record
"""

from __future__ import annotations

import os
import struct
from collections import OrderedDict

import numpy as np

from .errors import (
    BadMagicError,
    DuplicateNameError,
    LengthMismatchError,
    UnknownDtypeError,
    VersionError,
)

TENSOR_MAGIC = b"PDCT"
CKPT_MAGIC = b"PDCC"
VERSION = 1

_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("u1")}
_KINDS = {np.dtype(np.float32): 1, np.dtype(np.float64): 2, np.dtype(np.uint8): 3}


def encode_tensor(arr) -> bytes:
    arr = np.asarray(getattr(arr, "data", arr))
    code = _KINDS.get(arr.dtype)
    if code is None:
        raise UnknownDtypeError(f"unsupported dtype {arr.dtype}; expected f32, f64 or u8")
    if arr.ndim > 255:
        raise ValueError("too many dimensions")
    head = TENSOR_MAGIC + struct.pack("<BBB", VERSION, code, arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + np.ascontiguousarray(arr, dtype=_CODES[code]).tobytes()


def decode_tensor(buf: bytes, offset: int = 0, exact: bool = True) -> tuple:
    """Parse one record at ``offset``; returns (array, end offset).

    With ``exact`` the record must end exactly at the end of ``buf``.
    """
    if buf[offset : offset + 4] != TENSOR_MAGIC:
        raise BadMagicError(f"bad tensor magic {bytes(buf[offset:offset + 4])!r}")
    if len(buf) < offset + 7:
        raise LengthMismatchError("truncated tensor header")
    version, code, ndim = struct.unpack_from("<BBB", buf, offset + 4)
    if version != VERSION:
        raise VersionError(f"unsupported tensor version {version}")
    if code not in _CODES:
        raise UnknownDtypeError(f"unknown dtype code {code}")
    pos = offset + 7
    if len(buf) < pos + 4 * ndim:
        raise LengthMismatchError("truncated tensor dims")
    dims = struct.unpack_from(f"<{ndim}I", buf, pos)
    pos += 4 * ndim
    dtype = _CODES[code]
    nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    end = pos + nbytes
    if len(buf) < end or (exact and len(buf) != end):
        raise LengthMismatchError(f"payload holds {len(buf) - pos} bytes, dims {dims} need {nbytes}")
    arr = np.frombuffer(buf, dtype=dtype, count=nbytes // dtype.itemsize, offset=pos).reshape(dims)
    return arr.astype(dtype.newbyteorder("="), copy=True), end


def write_tensor(path, arr) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_tensor(arr))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_tensor(fh.read())[0]


def save_checkpoint(path, entries) -> None:
    """Write an ordered name -> array mapping (or sequence of pairs)."""
    items = list(entries.items()) if hasattr(entries, "items") else list(entries)
    names = [n for n, _ in items]
    if len(set(names)) != len(names):
        raise DuplicateNameError("duplicate entry names in checkpoint")
    chunks = [CKPT_MAGIC, struct.pack("<BI", VERSION, len(items))]
    for name, arr in items:
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)) + raw)
        chunks.append(encode_tensor(arr))
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(chunks))
    os.replace(tmp, path)


def load_checkpoint(path) -> "OrderedDict[str, np.ndarray]":
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != CKPT_MAGIC:
        raise BadMagicError(f"not a checkpoint (magic {buf[:4]!r})")
    if len(buf) < 9:
        raise LengthMismatchError("truncated checkpoint header")
    version, count = struct.unpack_from("<BI", buf, 4)
    if version != VERSION:
        raise VersionError(f"unsupported checkpoint version {version}")
    pos = 9
    out: OrderedDict = OrderedDict()
    for _ in range(count):
        if len(buf) < pos + 2:
            raise LengthMismatchError("truncated checkpoint entry")
        (n,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        if len(buf) < pos + n:
            raise LengthMismatchError("truncated checkpoint entry name")
        name = buf[pos : pos + n].decode("utf-8")
        pos += n
        if name in out:
            raise DuplicateNameError(f"duplicate checkpoint entry {name!r}")
        out[name], pos = decode_tensor(buf, pos, exact=False)
    if pos != len(buf):
        raise LengthMismatchError(f"{len(buf) - pos} trailing bytes after last entry")
    return out

"""
Reading and writing of VIMC parameter checkpoints.

A checkpoint is a flat little-endian container: the magic bytes ``VIMC``, a u32
version, a u32 tensor count, then for each tensor a u16 name length, the UTF-8 name,
a u8 rank, one u32 per dimension and the values as f64 in row-major order.
"""
import os
import struct
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

MAGIC = b"VIMC"
VERSION = 1

_HEADER = struct.Struct("<4sII")


class CheckpointError(ValueError):
    pass


def write_checkpoint(path: Union[str, Path], tensors: Mapping[str, np.ndarray]):
    """Write named arrays to ``path`` atomically (via a temporary sibling file)."""
    path = Path(path)
    chunks = [_HEADER.pack(MAGIC, VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        bname = name.encode("utf-8")
        if len(bname) > 0xFFFF:
            raise CheckpointError(f"tensor name too long: {name[:40]}...")
        if arr.ndim > 0xFF:
            raise CheckpointError(f"rank {arr.ndim} of '{name}' is not representable")
        chunks.append(struct.pack("<H", len(bname)))
        chunks.append(bname)
        chunks.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        chunks.append(arr.tobytes())

    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fl:
        fl.write(b"".join(chunks))
    os.replace(tmp, path)


def read_checkpoint(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """Read a checkpoint written by :func:`write_checkpoint`."""
    with open(path, "rb") as fl:
        buf = fl.read()

    def need(offset, n, what):
        if offset + n > len(buf):
            raise CheckpointError(f"{path}: truncated while reading {what}")

    need(0, _HEADER.size, "header")
    magic, version, count = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")

    out = {}
    pos = _HEADER.size
    for _ in range(count):
        need(pos, 2, "name length")
        (nlen,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        need(pos, nlen + 1, "name")
        name = buf[pos : pos + nlen].decode("utf-8")
        pos += nlen
        rank = buf[pos]
        pos += 1
        need(pos, 4 * rank, f"dims of '{name}'")
        shape = struct.unpack_from(f"<{rank}I", buf, pos)
        pos += 4 * rank
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        need(pos, nbytes, f"values of '{name}'")
        out[name] = np.frombuffer(buf, dtype="<f8", count=nbytes // 8, offset=pos).reshape(
            shape
        ).astype(np.float64)
        pos += nbytes

    if pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - pos} trailing bytes")
    return out

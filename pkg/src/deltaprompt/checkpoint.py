"""Versioned binary checkpoints of named float64 parameter blocks.

Layout, all little endian: 8-byte magic ``DPCKPT1\\0``, uint32 format
version, uint32 block count, then per block a uint16 name length, the UTF-8
name, a uint8 rank, uint32 dims, and the raw float64 data.  Save/load round
trips bitwise.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataError

__all__ = ["save_checkpoint", "load_checkpoint", "MAGIC", "VERSION"]

MAGIC = b"DPCKPT1\x00"
VERSION = 1


def save_checkpoint(path, blocks: dict[str, np.ndarray]) -> None:
    if not blocks:
        raise DataError("checkpoint needs at least one block")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blocks)))
        for name, arr in blocks.items():
            data = np.ascontiguousarray(arr, dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    blocks: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise DataError(f"{path}: not a checkpoint file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            n = int(np.prod(shape)) if ndim else 1
            raw = fh.read(8 * n)
            if len(raw) < 8 * n:
                raise DataError(f"{path}: truncated block {name!r}")
            blocks[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise DataError(f"{path}: trailing bytes after last block")
    return blocks

"""SOLGRID1 binary field dumps.

Layout: 8-byte magic ``SOLGRID1``, little-endian u64 ``nx``, u64 ``ny``,
f64 ``dx``, ``dy``, ``z``, then ``nx*ny`` complex samples as ``(re, im)``
f64 pairs in row-major order (rows are ``y``).
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .bpm import ScalarField

MAGIC = b"SOLGRID1"
_HEADER = struct.Struct("<8sQQddd")
# refuse sample counts whose byte size would not fit a signed 64-bit offset
_MAX_SAMPLES = (2**63 - 1 - _HEADER.size) // 16


class GridFormatError(ValueError):
    """The file is not a SOLGRID1 dump or its header is inconsistent."""


class GridTruncatedError(GridFormatError):
    def __init__(self, offset: int, expected: int):
        self.offset = offset
        self.expected = expected
        super().__init__(f"file truncated at byte {offset} (expected {expected} bytes)")


def dump_grid(f: ScalarField, path) -> None:
    amp = np.ascontiguousarray(f.amp, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, f.nx, f.ny, f.dx, f.dy, f.z))
        fh.write(amp.tobytes())


def load_grid(path) -> ScalarField:
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < len(MAGIC) or head[: len(MAGIC)] != MAGIC:
            raise GridFormatError(f"bad magic {head[:len(MAGIC)]!r}, expected {MAGIC!r}")
        if len(head) < _HEADER.size:
            raise GridTruncatedError(len(head), _HEADER.size)
        _, nx, ny, dx, dy, z = _HEADER.unpack(head)
        if nx == 0 or ny == 0 or nx > _MAX_SAMPLES // ny:
            raise GridFormatError(f"dimension overflow: nx={nx}, ny={ny}")
        expected = _HEADER.size + 16 * nx * ny
        if size < expected:
            raise GridTruncatedError(size, expected)
        if size > expected:
            raise GridFormatError(f"{size - expected} trailing bytes after the samples")
        data = np.frombuffer(fh.read(16 * nx * ny), dtype="<c16")
    try:
        return ScalarField(nx, ny, dx, dy, z, data.reshape(ny, nx).astype(np.complex128))
    except ValueError as exc:
        raise GridFormatError(str(exc)) from None

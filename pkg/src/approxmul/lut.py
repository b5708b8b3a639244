"""Lookup-table form of a multiplier and its binary file format.

File layout (all little-endian)::

    offset  size  field
    0       8     magic b"AMLUT1\\0\\0"
    8       1     n (bits of x)
    9       1     m (bits of y)
    10      2     entry_bits (= n + m)
    12      1     flags (bit 0: saturation fired while building)
    13      3     reserved, zero
    16      ...   2**n * 2**m entries, ceil((n+m)/8) bytes each, x-major
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distribution import OperandDistribution
from .ppmatrix import SearchSpace, evaluate, operand_grid

MAGIC = b"AMLUT1\0\0"
_HEADER = struct.Struct("<8sBBHB3s")
FLAG_SATURATED = 0x01


class LUTFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MultiplierLUT:
    n: int
    m: int
    entries: np.ndarray  # shape (2**n, 2**m), int64
    saturated: bool = False

    def __post_init__(self):
        if self.entries.shape != (1 << self.n, 1 << self.m):
            raise ValueError("LUT shape does not match operand widths")
        if self.entries.min(initial=0) < 0 or self.entries.max(initial=0) > self.max_output:
            raise ValueError("LUT entries outside the output range")

    @property
    def max_output(self) -> int:
        return (1 << (self.n + self.m)) - 1

    def __call__(self, x, y):
        return self.entries[x, y]

    def __eq__(self, other):
        return (
            isinstance(other, MultiplierLUT)
            and (self.n, self.m, self.saturated) == (other.n, other.m, other.saturated)
            and np.array_equal(self.entries, other.entries)
        )


def build_lut(space: SearchSpace, theta) -> MultiplierLUT:
    """Tabulate f(x, y | theta), clamping at the all-ones output."""
    xs, ys = operand_grid(space.n, space.m)
    raw = evaluate(space, theta, xs, ys).reshape(1 << space.n, 1 << space.m)
    bound = (1 << (space.n + space.m)) - 1
    saturated = bool(np.any(raw > bound))
    return MultiplierLUT(space.n, space.m, np.minimum(raw, bound), saturated)


def exact_lut(n: int = 8, m: int = 8) -> MultiplierLUT:
    x = np.arange(1 << n, dtype=np.int64)[:, None]
    y = np.arange(1 << m, dtype=np.int64)[None, :]
    return MultiplierLUT(n, m, x * y)


def zero_lut(n: int = 8, m: int = 8) -> MultiplierLUT:
    return MultiplierLUT(n, m, np.zeros((1 << n, 1 << m), dtype=np.int64))


def error_stats(lut: MultiplierLUT, dist: OperandDistribution) -> dict:
    """Error summary under ``dist``; max error is taken over pairs with p > 0."""
    if (lut.n, lut.m) != (dist.n, dist.m):
        raise ValueError("LUT and distribution widths differ")
    p = dist.matrix()
    err = exact_lut(lut.n, lut.m).entries - lut.entries
    abs_err = np.abs(err).astype(np.float64)
    support = p > 0
    return {
        "expected_squared_error": float((abs_err * abs_err * p).sum()),
        "mean_absolute_error": float((abs_err * p).sum()),
        "max_absolute_error": int(abs_err[support].max(initial=0)),
        "error_rate": float(p[err != 0].sum()),
    }


def lut_to_bytes(lut: MultiplierLUT) -> bytes:
    width = (lut.n + lut.m + 7) // 8
    flags = FLAG_SATURATED if lut.saturated else 0
    header = _HEADER.pack(MAGIC, lut.n, lut.m, lut.n + lut.m, flags, b"\0\0\0")
    le = lut.entries.astype("<u8").reshape(-1, 1).view(np.uint8)[:, :width]
    return header + le.tobytes()


def lut_from_bytes(data: bytes) -> MultiplierLUT:
    if len(data) < _HEADER.size:
        raise LUTFormatError("file shorter than the LUT header")
    magic, n, m, bits, flags, _ = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise LUTFormatError(f"bad magic {magic!r}")
    if bits != n + m or n == 0 or m == 0:
        raise LUTFormatError(f"inconsistent header: n={n} m={m} entry_bits={bits}")
    width = (bits + 7) // 8
    count = (1 << n) * (1 << m)
    payload = data[_HEADER.size :]
    if len(payload) != count * width:
        raise LUTFormatError(f"payload is {len(payload)} bytes, expected {count * width}")
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(count, width)
    padded = np.zeros((count, 8), dtype=np.uint8)
    padded[:, :width] = raw
    entries = padded.view("<u8").reshape(1 << n, 1 << m).astype(np.int64)
    try:
        return MultiplierLUT(n, m, entries, bool(flags & FLAG_SATURATED))
    except ValueError as exc:
        raise LUTFormatError(str(exc)) from exc


def save_lut(lut: MultiplierLUT, path) -> None:
    Path(path).write_bytes(lut_to_bytes(lut))


def load_lut(path) -> MultiplierLUT:
    return lut_from_bytes(Path(path).read_bytes())

"""8-bit asymmetric quantization and integer-only requantization.

real = scale * (q - zero_point), q in [0, 255].  Requantization realizes the
real-valued factor ``s_in * s_w / s_out`` as a Q31 integer multiplier plus a
right shift, so every output is bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

QMIN, QMAX = 0, 255
INT32_MIN, INT32_MAX = -(1 << 31), (1 << 31) - 1


@dataclass(frozen=True)
class QParams:
    scale: float
    zero_point: int

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if not QMIN <= self.zero_point <= QMAX:
            raise ValueError(f"zero_point {self.zero_point} outside [{QMIN}, {QMAX}]")

    @classmethod
    def from_range(cls, lo: float, hi: float) -> "QParams":
        """Min/max calibration; the range is widened to include 0 so that zero is exact."""
        lo, hi = min(lo, 0.0), max(hi, 0.0)
        if hi == lo:
            hi = lo + 1.0
        scale = (hi - lo) / (QMAX - QMIN)
        zp = int(np.clip(round_half_away(-lo / scale), QMIN, QMAX))
        return cls(scale, zp)

    def to_dict(self) -> dict:
        return {"scale": self.scale, "zero_point": self.zero_point}

    @classmethod
    def from_dict(cls, d: dict) -> "QParams":
        return cls(float(d["scale"]), int(d["zero_point"]))


@dataclass(frozen=True)
class QTensor:
    data: np.ndarray  # uint8
    qparams: QParams

    def __post_init__(self):
        if self.data.dtype != np.uint8:
            raise ValueError("QTensor data must be uint8")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def dequantize(self) -> np.ndarray:
        return self.qparams.scale * (self.data.astype(np.float64) - self.qparams.zero_point)


def round_half_away(v):
    v = np.asarray(v, dtype=np.float64)
    out = np.sign(v) * np.floor(np.abs(v) + 0.5)
    return out if out.ndim else float(out)


def quantize(real, qp: QParams) -> QTensor:
    q = round_half_away(np.asarray(real, dtype=np.float64) / qp.scale) + qp.zero_point
    return QTensor(np.clip(q, QMIN, QMAX).astype(np.uint8), qp)


def quantize_multiplier(effective_scale: float) -> tuple[int, int]:
    """Split ``effective_scale`` into (m0, shift) with m0 in [2**30, 2**31).

    effective_scale ~= m0 * 2**-31 * 2**-shift.  ``shift`` is negative for
    scales of 1 or more.
    """
    if not effective_scale > 0:
        raise ValueError("effective scale must be positive")
    mant, exp = math.frexp(effective_scale)  # scale = mant * 2**exp, mant in [0.5, 1)
    m0 = int(round_half_away(mant * (1 << 31)))
    if m0 == 1 << 31:
        m0 //= 2
        exp += 1
    return m0, -exp


def requantize(acc, effective_scale: float, out_zero_point: int) -> np.ndarray:
    """clamp(round_half_away(acc * effective_scale) + zp, 0, 255), in integer arithmetic."""
    m0, shift = quantize_multiplier(effective_scale)
    total = 31 + shift
    acc = np.asarray(acc, dtype=np.int64)
    if total <= 0:
        scaled = acc * m0 << -total
    else:
        # |acc| < 2**31 and m0 < 2**31 so the product fits an int64 magnitude
        prod = acc * m0
        mag = (np.abs(prod) + (1 << (total - 1))) >> total
        scaled = np.sign(prod) * mag
    return np.clip(scaled + out_zero_point, QMIN, QMAX).astype(np.uint8)


def requantize_reference(acc, effective_scale: float, out_zero_point: int) -> np.ndarray:
    """Double-precision version of :func:`requantize`, used as an oracle."""
    v = round_half_away(np.asarray(acc, dtype=np.float64) * effective_scale) + out_zero_point
    return np.clip(v, QMIN, QMAX).astype(np.uint8)


def saturate_int32(acc: np.ndarray) -> tuple[np.ndarray, bool]:
    clipped = np.clip(acc, INT32_MIN, INT32_MAX)
    return clipped, bool(np.any(clipped != acc))

"""Quantized layer kernels.

Only the raw ``x_q * w_q`` products go through the multiplier backend; the
zero-point corrections are exact integer sums::

    acc = sum mul(x_q, w_q) - Zw * sum x_q - Zx * sum w_q + K * Zx * Zw + bias
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..lut import MultiplierLUT
from .quant import QParams, QTensor, requantize, saturate_int32


class MulBackend:
    """Exact arithmetic when ``lut`` is None, table lookups otherwise."""

    def __init__(self, lut: MultiplierLUT | None = None):
        if lut is not None and (lut.n, lut.m) != (8, 8):
            raise ValueError("the inference pipeline needs an 8x8 LUT")
        self.lut = lut
        self._table = None if lut is None else lut.entries.astype(np.int64)

    @property
    def kind(self) -> str:
        return "exact" if self.lut is None else "lut"

    def product_sums(self, patches: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """sum_k mul(patches[..., k], weights[o, k]) -> shape patches.shape[:-1] + (O,)."""
        if self._table is None:
            return patches.astype(np.int64) @ weights.astype(np.int64).T
        out = np.zeros(patches.shape[:-1] + (weights.shape[0],), dtype=np.int64)
        w = weights.astype(np.intp)
        for k in range(patches.shape[-1]):
            out += self._table[patches[..., k].astype(np.intp)[..., None], w[:, k]]
        return out


@dataclass
class Recorder:
    """Operand histograms of every multiplication, per layer."""

    inputs: dict[str, np.ndarray] = field(default_factory=dict)
    weights: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, layer: str, patches: np.ndarray, weights: np.ndarray) -> None:
        n_out = weights.shape[0]
        uses = int(np.prod(patches.shape[:-1]))
        xin = np.bincount(patches.ravel(), minlength=256) * n_out
        win = np.bincount(weights.ravel(), minlength=256) * uses
        self.inputs[layer] = self.inputs.get(layer, 0) + xin
        self.weights[layer] = self.weights.get(layer, 0) + win

    def merged(self) -> tuple[np.ndarray, np.ndarray]:
        zero = np.zeros(256, dtype=np.int64)
        return sum(self.inputs.values(), zero), sum(self.weights.values(), zero)


@dataclass
class Flags:
    accumulator_saturated: bool = False


def integer_accumulate(patches, weights, zx: int, zw: int, bias, backend: MulBackend, flags: Flags | None = None):
    raw = backend.product_sums(patches, weights)
    k = patches.shape[-1]
    sum_x = patches.astype(np.int64).sum(axis=-1, keepdims=True)
    sum_w = weights.astype(np.int64).sum(axis=-1)
    acc = raw - zw * sum_x - zx * sum_w + k * zx * zw
    if bias is not None:
        acc = acc + bias.astype(np.int64)
    acc, sat = saturate_int32(acc)
    if flags is not None and sat:
        flags.accumulator_saturated = True
    return acc


def im2col(data: np.ndarray, kh: int, kw: int, stride: int, padding: int, pad_value: int):
    """(B, C, H, W) -> patches (B, OH*OW, C*kh*kw), OH, OW; channel-major patch order."""
    if padding:
        data = np.pad(data, ((0, 0), (0, 0), (padding, padding), (padding, padding)), constant_values=pad_value)
    b, c, h, w = data.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(data, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride][:, :, :oh, :ow]  # (B, C, OH, OW, kh, kw)
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(b, oh * ow, c * kh * kw), oh, ow


def conv2d_q(x: QTensor, w: QTensor, bias, stride: int, padding: int, backend: MulBackend,
             recorder: Recorder | None = None, name: str = "conv", flags: Flags | None = None) -> np.ndarray:
    """32-bit accumulators, shape (B, O, OH, OW)."""
    o = w.shape[0]
    patches, oh, ow = im2col(x.data, w.shape[2], w.shape[3], stride, padding, x.qparams.zero_point)
    wmat = w.data.reshape(o, -1)
    if recorder is not None:
        recorder.add(name, patches, wmat)
    acc = integer_accumulate(patches, wmat, x.qparams.zero_point, w.qparams.zero_point, bias, backend, flags)
    return acc.transpose(0, 2, 1).reshape(x.shape[0], o, oh, ow)


def dense_q(x: QTensor, w: QTensor, bias, backend: MulBackend,
            recorder: Recorder | None = None, name: str = "dense", flags: Flags | None = None) -> np.ndarray:
    """32-bit accumulators, shape (B, O); ``w`` is (O, K)."""
    if recorder is not None:
        recorder.add(name, x.data, w.data)
    return integer_accumulate(x.data, w.data, x.qparams.zero_point, w.qparams.zero_point, bias, backend, flags)


def requantize_acc(acc, x_qp: QParams, w_qp: QParams, out_qp: QParams) -> QTensor:
    eff = x_qp.scale * w_qp.scale / out_qp.scale
    return QTensor(requantize(acc, eff, out_qp.zero_point), out_qp)


def relu_q(x: QTensor) -> QTensor:
    return QTensor(np.maximum(x.data, np.uint8(x.qparams.zero_point)), x.qparams)


def maxpool2x2_q(x: QTensor) -> QTensor:
    b, c, h, w = x.shape
    d = x.data[:, :, : h - h % 2, : w - w % 2].reshape(b, c, h // 2, 2, w // 2, 2)
    return QTensor(d.max(axis=(3, 5)), x.qparams)


def flatten_q(x: QTensor) -> QTensor:
    return QTensor(x.data.reshape(x.shape[0], -1), x.qparams)

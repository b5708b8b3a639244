"""Squared error, expected error under p(x, y), term-count penalty and the
penalized objective that the optimizer minimizes.

The hot path is :class:`ErrorEvaluator`.  It exploits the fact that a term's
value depends only on its (group, op) pair, the column merely scales it, so
for a batch of theta vectors

    f = base + (theta @ S.T) @ T.T

where ``T`` holds the 0/1 value of every (group, op) combination at every
operand pair and ``S`` maps each term to ``2 ** column`` of its (group, op)
slot.  All quantities are integers below 2**53, so the float64 products are
exact; only the final probability-weighted reduction rounds, and it is a
per-row numpy pairwise sum whose order never depends on batch size.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distribution import OperandDistribution
from .ppmatrix import OPS, SearchSpace, evaluate, exact_multiply, operand_grid, single_bit_sum, uncompressed_sum

DEFAULT_SAMPLES = 1 << 17


@dataclass(frozen=True)
class ObjectiveConfig:
    lambda1: float = 1.0
    mode: str = "exhaustive"  # or "sampled"
    samples: int = DEFAULT_SAMPLES
    seed: int = 0

    def __post_init__(self):
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be non-negative")
        if self.mode not in ("exhaustive", "sampled"):
            raise ValueError(f"unknown objective mode {self.mode!r}")
        if self.mode == "sampled" and self.samples < 1:
            raise ValueError("sampled mode needs at least one sample")

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectiveConfig":
        return cls(
            lambda1=float(d.get("lambda1", 1.0)),
            mode=d.get("mode", "exhaustive"),
            samples=int(d.get("samples", DEFAULT_SAMPLES)),
            seed=int(d.get("seed", 0)),
        )

    def to_dict(self) -> dict:
        return {"lambda1": self.lambda1, "mode": self.mode, "samples": self.samples, "seed": self.seed}


class ErrorEvaluator:
    """Weighted mean squared error of many theta vectors over fixed operand pairs."""

    def __init__(self, space: SearchSpace, xs, ys, weights, chunk: int = 16):
        self.space = space
        self.xs = np.asarray(xs, dtype=np.int64)
        self.ys = np.asarray(ys, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.chunk = chunk
        self.exact = (self.xs * self.ys).astype(np.float64)
        base = uncompressed_sum(space.n, space.m, space.compressed_rows, self.xs, self.ys)
        self.base = (base + single_bit_sum(space, self.xs, self.ys)).astype(np.float64)

        pairs = space.grouping.pairs
        slot = {(g.id, op): k for k, (g, op) in enumerate((g, op) for g in pairs for op in OPS)}
        self.T = np.empty((len(slot), len(self.xs)), dtype=np.float64)
        for (gid, op), k in slot.items():
            b1, b2 = space.grouping.groups[gid].members
            a, b = b1.value(self.xs, self.ys), b2.value(self.xs, self.ys)
            self.T[k] = {"AND": a & b, "OR": a | b, "XOR": a ^ b}[op]
        self.S = np.zeros((space.Z, len(slot)), dtype=np.float64)
        for i, t in enumerate(space.terms):
            self.S[i, slot[(t.group_id, t.op)]] = float(1 << t.column)

    @classmethod
    def exhaustive(cls, space: SearchSpace, dist: OperandDistribution) -> "ErrorEvaluator":
        _check_widths(space, dist)
        xs, ys = operand_grid(space.n, space.m)
        return cls(space, xs, ys, dist.matrix().ravel())

    @classmethod
    def sampled(cls, space: SearchSpace, dist: OperandDistribution, sample_count: int, seed: int) -> "ErrorEvaluator":
        _check_widths(space, dist)
        if sample_count < 1:
            raise ValueError("sample_count must be at least 1")
        xs, ys = dist.sample(sample_count, np.random.default_rng(seed))
        return cls(space, xs, ys, np.full(sample_count, 1.0 / sample_count))

    def outputs(self, thetas) -> np.ndarray:
        """Raw f values, shape (batch, pairs)."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        return self.base + (thetas @ self.S) @ self.T

    def errors(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas))
        if thetas.shape[1] != self.space.Z:
            raise ValueError(f"theta length {thetas.shape[1]} does not match Z={self.space.Z}")
        out = np.empty(len(thetas))
        for start in range(0, len(thetas), self.chunk):
            f = self.outputs(thetas[start : start + self.chunk])
            d = self.exact - f
            out[start : start + self.chunk] = (d * d * self.weights).sum(axis=1)
        return out

    def error(self, theta) -> float:
        return float(self.errors(theta)[0])


def _check_widths(space: SearchSpace, dist: OperandDistribution) -> None:
    if (space.n, space.m) != (dist.n, dist.m):
        raise ValueError(f"distribution is {dist.n}x{dist.m} but the multiplier is {space.n}x{space.m}")


def squared_error(space: SearchSpace, theta, x, y):
    d = exact_multiply(x, y) - evaluate(space, theta, x, y)
    return d * d


def expected_error(space: SearchSpace, theta, dist: OperandDistribution) -> float:
    return ErrorEvaluator.exhaustive(space, dist).error(theta)


def sampled_expected_error(space: SearchSpace, theta, dist: OperandDistribution, sample_count: int, seed: int) -> float:
    return ErrorEvaluator.sampled(space, dist, sample_count, seed).error(theta)


def penalty(theta, lambda1: float) -> float:
    return float(lambda1) * int(np.count_nonzero(theta))


def make_evaluator(space: SearchSpace, dist: OperandDistribution, cfg: ObjectiveConfig) -> ErrorEvaluator:
    if cfg.mode == "sampled":
        return ErrorEvaluator.sampled(space, dist, cfg.samples, cfg.seed)
    return ErrorEvaluator.exhaustive(space, dist)


def objective(space: SearchSpace, theta, dist: OperandDistribution, cfg: ObjectiveConfig = ObjectiveConfig()) -> float:
    return make_evaluator(space, dist, cfg).error(theta) + penalty(theta, cfg.lambda1)

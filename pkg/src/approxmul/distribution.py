"""Operand distributions p(x, y) and their JSON/CSV forms.

Three kinds are supported: ``uniform``, ``product`` (independent marginals
built from two histograms) and ``joint`` (a full N x M probability matrix).
Sampling goes through Vose alias tables, one per marginal for ``product``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

NORM_TOL = 1e-9


@dataclass(frozen=True)
class Histogram:
    bit_width: int
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (1 << self.bit_width,):
            raise ValueError(f"expected {1 << self.bit_width} counts for a {self.bit_width}-bit histogram, got {counts.shape}")
        if counts.dtype.kind == "f":
            if not np.all(np.equal(np.floor(counts), counts)):
                raise ValueError("histogram counts must be integers")
        elif counts.dtype.kind not in "iu":
            raise ValueError("histogram counts must be integers")
        if np.any(counts < 0):
            raise ValueError("histogram counts must be non-negative")
        counts = counts.astype(np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_values(cls, values, bit_width: int) -> "Histogram":
        return cls(bit_width, np.bincount(np.asarray(values).ravel(), minlength=1 << bit_width))

    def __add__(self, other: "Histogram") -> "Histogram":
        if other.bit_width != self.bit_width:
            raise ValueError("cannot add histograms of different widths")
        return Histogram(self.bit_width, self.counts + other.counts)

    def __eq__(self, other):
        return (
            isinstance(other, Histogram)
            and self.bit_width == other.bit_width
            and np.array_equal(self.counts, other.counts)
        )

    def to_dict(self) -> dict:
        return {"bit_width": self.bit_width, "counts": [int(c) for c in self.counts]}

    @classmethod
    def from_dict(cls, d: dict) -> "Histogram":
        try:
            return cls(int(d["bit_width"]), np.asarray(d["counts"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed histogram: {exc}") from exc

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["value", "count"])
        w.writerows((v, int(c)) for v, c in enumerate(self.counts))
        return buf.getvalue()


def mode(h: Histogram) -> int:
    """Most frequent value; the smallest one wins ties."""
    return int(np.argmax(h.counts))


def _normalized(counts: np.ndarray, alpha: float) -> np.ndarray:
    smoothed = counts.astype(np.float64) + alpha
    total = smoothed.sum()
    if total <= 0:
        raise ValueError("distribution undefined: empty histogram with alpha=0")
    return smoothed / total


@dataclass(frozen=True, eq=False)
class OperandDistribution:
    """p(x, y) over all operand pairs of an n x m multiplier.

    ``px``/``py`` hold the marginals for the uniform and product kinds;
    ``joint`` holds the full matrix for the joint kind.  ``matrix()`` always
    gives the N x M table, x along the first axis.
    """

    kind: str
    n: int
    m: int
    px: np.ndarray | None = None
    py: np.ndarray | None = None
    joint: np.ndarray | None = None
    alpha: float = 0.0
    # source histograms, kept so save/load is lossless
    hx: Histogram | None = None
    hy: Histogram | None = None

    def __post_init__(self):
        if self.kind in ("uniform", "product"):
            if self.px.shape != (1 << self.n,) or self.py.shape != (1 << self.m,):
                raise ValueError("marginal lengths do not match bit widths")
            for p in (self.px, self.py):
                if np.any(p < 0) or abs(p.sum() - 1.0) > NORM_TOL:
                    raise ValueError("marginal is not a probability vector")
        elif self.kind == "joint":
            if self.joint.shape != (1 << self.n, 1 << self.m):
                raise ValueError("joint matrix shape does not match bit widths")
            if np.any(self.joint < 0) or abs(self.joint.sum() - 1.0) > NORM_TOL:
                raise ValueError("joint matrix is not a probability table")
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def M(self) -> int:
        return 1 << self.m

    def matrix(self) -> np.ndarray:
        if self.kind == "joint":
            return self.joint
        return np.outer(self.px, self.py)

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "joint":
            return self.joint.sum(axis=1), self.joint.sum(axis=0)
        return self.px, self.py

    def prob(self, x: int, y: int) -> float:
        return float(self.matrix()[x, y])

    def sample(self, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``count`` i.i.d. operand pairs."""
        if self.kind == "joint":
            flat = AliasTable(self.joint.ravel()).sample(count, rng)
            return flat // self.M, flat % self.M
        xs = AliasTable(self.px).sample(count, rng)
        ys = AliasTable(self.py).sample(count, rng)
        return xs, ys

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind, "n": self.n, "m": self.m}
        if self.kind == "product":
            d["alpha"] = self.alpha
            d["px"] = self.hx.to_dict()
            d["py"] = self.hy.to_dict()
        elif self.kind == "joint":
            d["joint"] = [[float(v) for v in row] for row in self.joint]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OperandDistribution":
        try:
            kind = d["kind"]
            if kind == "uniform":
                return uniform(int(d["n"]), int(d["m"]))
            if kind == "product":
                dist = product_joint(Histogram.from_dict(d["px"]), Histogram.from_dict(d["py"]), float(d["alpha"]))
                if (dist.n, dist.m) != (int(d["n"]), int(d["m"])):
                    raise ValueError("histogram widths disagree with n/m")
                return dist
            if kind == "joint":
                return joint(np.asarray(d["joint"], dtype=np.float64))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed distribution: {exc}") from exc
        raise ValueError(f"unknown distribution kind {d.get('kind')!r}")


def uniform(n: int, m: int) -> OperandDistribution:
    return OperandDistribution(
        "uniform", n, m, px=np.full(1 << n, 1.0 / (1 << n)), py=np.full(1 << m, 1.0 / (1 << m))
    )


def product_joint(px: Histogram, py: Histogram, alpha: float = 1.0) -> OperandDistribution:
    """Independent operands, each marginal from a Laplace-smoothed histogram."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return OperandDistribution(
        "product",
        px.bit_width,
        py.bit_width,
        px=_normalized(px.counts, alpha),
        py=_normalized(py.counts, alpha),
        alpha=float(alpha),
        hx=px,
        hy=py,
    )


def joint(matrix) -> OperandDistribution:
    matrix = np.asarray(matrix, dtype=np.float64)
    total = matrix.sum()
    if total <= 0:
        raise ValueError("joint matrix has no mass")
    N, M = matrix.shape
    n, m = N.bit_length() - 1, M.bit_length() - 1
    if (1 << n, 1 << m) != (N, M):
        raise ValueError("joint matrix sides must be powers of two")
    return OperandDistribution("joint", n, m, joint=matrix / total)


def point_mass(n: int, m: int, x: int, y: int) -> OperandDistribution:
    hx = np.zeros(1 << n, dtype=np.int64)
    hy = np.zeros(1 << m, dtype=np.int64)
    hx[x] = hy[y] = 1
    return product_joint(Histogram(n, hx), Histogram(m, hy), alpha=0.0)


class AliasTable:
    """Vose's alias method: O(n) build, O(1) per draw."""

    def __init__(self, probs):
        p = np.asarray(probs, dtype=np.float64)
        size = len(p)
        scaled = p * size / p.sum()
        self.prob = np.ones(size)
        self.alias = np.arange(size)
        small = [i for i in range(size) if scaled[i] < 1.0]
        large = [i for i in range(size) if scaled[i] >= 1.0]
        while small and large:
            s, g = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = g
            scaled[g] -= 1.0 - scaled[s]
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are 1 up to rounding
        for i in small + large:
            self.prob[i] = 1.0
            self.alias[i] = i

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, len(self.prob), size=count)
        accept = rng.random(count) < self.prob[idx]
        return np.where(accept, idx, self.alias[idx]).astype(np.int64)


def _dump(obj: dict) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def save_histogram(h: Histogram, path) -> None:
    Path(path).write_text(_dump(h.to_dict()))


def load_histogram(path) -> Histogram:
    try:
        return Histogram.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc


def save_distribution(dist: OperandDistribution, path) -> None:
    Path(path).write_text(_dump(dist.to_dict()))


def load_distribution(path) -> OperandDistribution:
    try:
        return OperandDistribution.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc

"""Partial-product bit-matrix, bit groups and the compressed-term search space.

An unsigned n x m multiplier ``x * y`` has one partial-product row per bit of
``y``.  Bit ``(row, col)`` of the matrix is ``x[col] & y[row]`` and carries the
arithmetic weight ``2 ** (row + col)``.  Rows listed in ``compressed_rows`` are
split into groups of one or two bits; each two-bit group can be compressed by
AND, OR or XOR into a single bit that is placed at any allowed column.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

OPS = ("AND", "OR", "XOR")


@dataclass(frozen=True, order=True)
class PPBit:
    row: int  # bit index of y
    col: int  # bit index of x

    @property
    def column(self) -> int:
        return self.row + self.col

    def value(self, x, y):
        return ((np.asarray(x) >> self.col) & 1) & ((np.asarray(y) >> self.row) & 1)


@dataclass(frozen=True)
class BitGroup:
    id: int
    members: tuple[PPBit, ...]
    base_column: int

    def __post_init__(self):
        if not 1 <= len(self.members) <= 2:
            raise ValueError(f"group {self.id} must hold 1 or 2 bits, got {len(self.members)}")
        if len(set(self.members)) != len(self.members):
            raise ValueError(f"group {self.id} has duplicate members")

    @property
    def is_pair(self) -> bool:
        return len(self.members) == 2


@dataclass(frozen=True)
class GroupingPlan:
    n: int
    m: int
    compressed_rows: frozenset[int]
    groups: tuple[BitGroup, ...]

    def __post_init__(self):
        for r in self.compressed_rows:
            if not 0 <= r < self.m:
                raise ValueError(f"compressed row {r} outside [0, {self.m})")
        seen: set[PPBit] = set()
        for idx, g in enumerate(self.groups):
            if g.id != idx:
                raise ValueError("group ids must be 0..len(groups)-1 in order")
            for b in g.members:
                if b.row not in self.compressed_rows or not 0 <= b.col < self.n:
                    raise ValueError(f"bit {b} is not in a compressed row of a {self.n}x{self.m} matrix")
                if b in seen:
                    raise ValueError(f"bit {b} appears in more than one group")
                seen.add(b)
        expected = {PPBit(r, c) for r in self.compressed_rows for c in range(self.n)}
        if seen != expected:
            raise ValueError("groups do not cover every bit of the compressed rows")

    @property
    def pairs(self) -> list[BitGroup]:
        return [g for g in self.groups if g.is_pair]

    @property
    def singles(self) -> list[BitGroup]:
        return [g for g in self.groups if not g.is_pair]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "compressed_rows": sorted(self.compressed_rows),
            "groups": [
                {
                    "id": g.id,
                    "members": [[b.row, b.col] for b in g.members],
                    "base_column": g.base_column,
                }
                for g in self.groups
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroupingPlan":
        groups = []
        for g in d["groups"]:
            members = tuple(PPBit(int(r), int(c)) for r, c in g["members"])
            base = g.get("base_column")
            if base is None:
                base = min(b.column for b in members)
            groups.append(BitGroup(int(g["id"]), members, int(base)))
        return cls(int(d["n"]), int(d["m"]), frozenset(int(r) for r in d["compressed_rows"]), tuple(groups))


def default_grouping(n: int, m: int, compressed_rows: Iterable[int]) -> GroupingPlan:
    """Pair same-column bits of consecutive compressed rows, top row first.

    A bit of row ``r`` that is still free is paired with the bit of row
    ``r + 1`` sitting in the same matrix column, if that row is compressed and
    the bit is free.  Whatever is left becomes a one-bit group.  For a 4x4
    multiplier with every row compressed this gives 10 groups.
    """
    rows = sorted(set(int(r) for r in compressed_rows))
    for r in rows:
        if not 0 <= r < m:
            raise ValueError(f"compressed row {r} outside [0, {m})")
    row_set = set(rows)
    taken: set[PPBit] = set()
    members: list[tuple[PPBit, ...]] = []
    for r in rows:
        for c in range(n):
            b = PPBit(r, c)
            if b in taken:
                continue
            partner = PPBit(r + 1, c - 1)
            if r + 1 in row_set and 0 <= c - 1 < n and partner not in taken:
                members.append((b, partner))
                taken.update((b, partner))
            else:
                members.append((b,))
                taken.add(b)
    members.sort(key=lambda ms: (ms[0].column, ms[0].row))
    groups = tuple(BitGroup(i, ms, ms[0].column) for i, ms in enumerate(members))
    return GroupingPlan(n, m, frozenset(rows), groups)


def vertical_grouping(n: int, m: int, compressed_rows: Iterable[int]) -> GroupingPlan:
    """Pair bit ``col`` of rows ``r`` and ``r + 1`` (adjacent columns).

    Rows are paired off in ascending order; an unpaired last row yields
    one-bit groups.  With an even number of rows there are no single bits,
    so an all-zero theta gives f = u(x, y).
    """
    rows = sorted(set(int(r) for r in compressed_rows))
    members: list[tuple[PPBit, ...]] = []
    for k in range(0, len(rows), 2):
        pair = rows[k : k + 2]
        for c in range(n):
            members.append(tuple(PPBit(r, c) for r in pair))
    groups = tuple(BitGroup(i, ms, min(b.column for b in ms)) for i, ms in enumerate(members))
    return GroupingPlan(n, m, frozenset(rows), groups)


@dataclass(frozen=True)
class CompressedTermSpec:
    op: str
    group_id: int
    column: int


@dataclass(frozen=True)
class SearchSpace:
    n: int
    m: int
    grouping: GroupingPlan
    allowed_columns: tuple[int, ...]
    terms: tuple[CompressedTermSpec, ...] = field(repr=False)

    @property
    def Z(self) -> int:
        return len(self.terms)

    @property
    def compressed_rows(self) -> frozenset[int]:
        return self.grouping.compressed_rows

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "grouping": self.grouping.to_dict(),
            "allowed_columns": list(self.allowed_columns),
            "terms": [{"op": t.op, "group": t.group_id, "column": t.column} for t in self.terms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpace":
        space = enumerate_search_space(
            int(d["n"]), int(d["m"]), GroupingPlan.from_dict(d["grouping"]), d["allowed_columns"]
        )
        if "terms" in d:
            listed = [CompressedTermSpec(t["op"], int(t["group"]), int(t["column"])) for t in d["terms"]]
            if tuple(listed) != space.terms:
                raise ValueError("serialized term list does not match the canonical enumeration")
        return space

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def half_adder_theta(self) -> np.ndarray | None:
        """XOR at the group column plus AND one column up, for every pair.

        Reproduces the exact product because ``b1 + b2 = (b1 ^ b2) + 2 (b1 & b2)``.
        Returns None when some pair straddles two columns or a needed column
        is not allowed.
        """
        index = {t: i for i, t in enumerate(self.terms)}
        theta = np.zeros(self.Z, dtype=np.uint8)
        for g in self.grouping.pairs:
            if g.members[0].column != g.members[1].column:
                return None
            c = g.members[0].column
            for spec in (CompressedTermSpec("XOR", g.id, c), CompressedTermSpec("AND", g.id, c + 1)):
                i = index.get(spec)
                if i is None:
                    return None
                theta[i] = 1
        return theta


def enumerate_search_space(
    n: int, m: int, grouping: GroupingPlan, allowed_columns: Iterable[int] | None = None
) -> SearchSpace:
    if (grouping.n, grouping.m) != (n, m):
        raise ValueError(f"grouping is for {grouping.n}x{grouping.m}, not {n}x{m}")
    if allowed_columns is None:
        allowed_columns = range(n + m)
    cols = tuple(sorted(set(int(c) for c in allowed_columns)))
    for c in cols:
        if not 0 <= c < n + m:
            raise ValueError(f"column {c} outside [0, {n + m})")
    terms = tuple(
        CompressedTermSpec(op, g.id, c) for g in grouping.pairs for op in OPS for c in cols
    )
    return SearchSpace(n, m, grouping, cols, terms)


def make_space(
    n: int, m: int, compressed_rows: Iterable[int] | None = None, allowed_columns: Iterable[int] | None = None
) -> SearchSpace:
    """Search space with the default grouping; all rows compressed when unspecified."""
    rows = range(m) if compressed_rows is None else compressed_rows
    return enumerate_search_space(n, m, default_grouping(n, m, rows), allowed_columns)


def dnn_preset() -> SearchSpace:
    """8x8 multiplier with its first four partial products compressed."""
    return make_space(8, 8, compressed_rows=(0, 1, 2, 3))


def _check_operands(space: SearchSpace, x, y):
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if np.any(x < 0) or np.any(x >= 1 << space.n) or np.any(y < 0) or np.any(y >= 1 << space.m):
        raise ValueError(f"operands out of range for a {space.n}x{space.m} multiplier")
    return x, y


def _apply(op: str, a, b):
    if op == "AND":
        return a & b
    if op == "OR":
        return a | b
    if op == "XOR":
        return a ^ b
    raise ValueError(f"unknown op {op!r}")


def term_value(space: SearchSpace, term_index: int, x, y):
    if not 0 <= term_index < space.Z:
        raise IndexError(f"term index {term_index} out of range for Z={space.Z}")
    x, y = _check_operands(space, x, y)
    t = space.terms[term_index]
    b1, b2 = space.grouping.groups[t.group_id].members
    return _apply(t.op, b1.value(x, y), b2.value(x, y))


def uncompressed_sum(n: int, m: int, compressed_rows: Iterable[int], x, y):
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    keep = sum(1 << r for r in range(m) if r not in set(compressed_rows))
    return x * (y & keep)


def single_bit_sum(space: SearchSpace, x, y):
    """Contribution of the one-bit groups, which always stay at their base column."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    total = np.zeros(np.broadcast(x, y).shape, dtype=np.int64)
    for g in space.grouping.singles:
        total = total + (g.members[0].value(x, y) << g.base_column)
    return total


def evaluate(space: SearchSpace, theta, x, y):
    """Approximate product f(x, y | theta); works elementwise on arrays."""
    theta = np.asarray(theta)
    if theta.shape != (space.Z,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({space.Z},)")
    x, y = _check_operands(space, x, y)
    out = uncompressed_sum(space.n, space.m, space.compressed_rows, x, y) + single_bit_sum(space, x, y)
    for i in np.flatnonzero(theta):
        t = space.terms[i]
        b1, b2 = space.grouping.groups[t.group_id].members
        out = out + (_apply(t.op, b1.value(x, y), b2.value(x, y)) << t.column)
    if out.ndim == 0:
        return int(out)
    return out


def exact_multiply(x, y):
    if np.ndim(x) or np.ndim(y):
        return np.asarray(x, dtype=np.int64) * np.asarray(y, dtype=np.int64)
    return int(x) * int(y)


def operand_grid(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """All operand pairs, x-major (x varies slowest)."""
    x, y = np.meshgrid(np.arange(1 << n, dtype=np.int64), np.arange(1 << m, dtype=np.int64), indexing="ij")
    return x.ravel(), y.ravel()


def theta_from_bits(bits: Sequence[int] | str, Z: int) -> np.ndarray:
    if isinstance(bits, str):
        bits = [int(ch) for ch in bits]
    theta = np.asarray(bits, dtype=np.uint8)
    if theta.shape != (Z,) or np.any(theta > 1):
        raise ValueError(f"theta must be {Z} binary entries")
    return theta


def theta_to_bits(theta) -> str:
    return "".join(str(int(b)) for b in np.asarray(theta))

"""Gate-level netlist of an approximate multiplier.

Structure: AND gates produce the partial-product bits that are needed, the
selected compressed terms become AND/OR/XOR gates on their two member bits,
the resulting bit-matrix is reduced column by column with full adders (3:2)
and half adders (2:2) until every column holds at most two bits, and a
ripple-carry adder finishes the sum.  Bits that land at or above column
``n + m`` drive a saturation flag that forces the output to all ones, which
matches :func:`approxmul.lut.build_lut`.

Wire 0 is the constant 0.  Wires 1..n are ``x[0..n-1]`` and wires
n+1..n+m are ``y[0..m-1]``.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .ppmatrix import PPBit, SearchSpace

CONST0 = 0
GATE_KINDS = ("AND", "OR", "XOR", "NOT", "HA", "FA")
_ARITY = {"AND": (2, 1), "OR": (2, 1), "XOR": (2, 1), "NOT": (1, 1), "HA": (2, 2), "FA": (3, 2)}


@dataclass(frozen=True)
class Gate:
    kind: str
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    role: str = ""  # pp, term, single, reduce, final, saturate

    def to_dict(self) -> dict:
        return {"kind": self.kind, "inputs": list(self.inputs), "outputs": list(self.outputs), "role": self.role}


@dataclass
class Netlist:
    n: int
    m: int
    gates: list[Gate] = field(default_factory=list)
    outputs: list[int] = field(default_factory=list)
    n_wires: int = 0

    def __post_init__(self):
        if not self.n_wires:
            self.n_wires = 1 + self.n + self.m

    def x_wire(self, i: int) -> int:
        return 1 + i

    def y_wire(self, i: int) -> int:
        return 1 + self.n + i

    def new_wire(self) -> int:
        self.n_wires += 1
        return self.n_wires - 1

    def add(self, kind: str, inputs, role: str = "") -> tuple[int, ...]:
        outs = tuple(self.new_wire() for _ in range(_ARITY[kind][1]))
        self.gates.append(Gate(kind, tuple(inputs), outs, role))
        return outs

    def check(self) -> None:
        """Raise unless every gate reads only primary inputs or earlier outputs."""
        ready = set(range(1 + self.n + self.m))
        for i, g in enumerate(self.gates):
            if g.kind not in GATE_KINDS:
                raise ValueError(f"gate {i}: unknown kind {g.kind}")
            if (len(g.inputs), len(g.outputs)) != _ARITY[g.kind]:
                raise ValueError(f"gate {i}: wrong arity for {g.kind}")
            missing = [w for w in g.inputs if w not in ready]
            if missing:
                raise ValueError(f"gate {i} reads undriven wires {missing}")
            ready.update(g.outputs)
        if len(self.outputs) != self.n + self.m or any(w not in ready for w in self.outputs):
            raise ValueError("output bus is incomplete or undriven")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "const0_wire": CONST0,
            "x_wires": [self.x_wire(i) for i in range(self.n)],
            "y_wires": [self.y_wire(i) for i in range(self.m)],
            "n_wires": self.n_wires,
            "gates": [g.to_dict() for g in self.gates],
            "outputs": list(self.outputs),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Netlist":
        nl = cls(int(d["n"]), int(d["m"]), n_wires=int(d["n_wires"]))
        nl.gates = [Gate(g["kind"], tuple(g["inputs"]), tuple(g["outputs"]), g.get("role", "")) for g in d["gates"]]
        nl.outputs = list(d["outputs"])
        nl.check()
        return nl


def emit_netlist(space: SearchSpace, theta) -> Netlist:
    theta = np.asarray(theta)
    if theta.shape != (space.Z,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({space.Z},)")
    n, m = space.n, space.m
    nl = Netlist(n, m)
    pp_wire: dict[PPBit, int] = {}

    def pp(bit: PPBit) -> int:
        if bit not in pp_wire:
            pp_wire[bit] = nl.add("AND", (nl.x_wire(bit.col), nl.y_wire(bit.row)), "pp")[0]
        return pp_wire[bit]

    columns: dict[int, list[int]] = {}
    for r in range(m):
        if r in space.compressed_rows:
            continue
        for c in range(n):
            columns.setdefault(r + c, []).append(pp(PPBit(r, c)))
    for g in space.grouping.singles:
        w = nl.add("AND", (nl.x_wire(g.members[0].col), nl.y_wire(g.members[0].row)), "single")[0]
        columns.setdefault(g.base_column, []).append(w)
    for i in np.flatnonzero(theta):
        t = space.terms[i]
        b1, b2 = space.grouping.groups[t.group_id].members
        w = nl.add(t.op, (pp(b1), pp(b2)), "term")[0]
        columns.setdefault(t.column, []).append(w)

    # 3:2 / 2:2 reduction stages until every column has height <= 2
    while any(len(bits) > 2 for bits in columns.values()):
        nxt: dict[int, list[int]] = {}
        for col in sorted(columns):
            bits = columns[col]
            if len(bits) <= 2:
                nxt.setdefault(col, []).extend(bits)
                continue
            k = 0
            while len(bits) - k >= 3:
                s, c = nl.add("FA", bits[k : k + 3], "reduce")
                nxt.setdefault(col, []).append(s)
                nxt.setdefault(col + 1, []).append(c)
                k += 3
            if len(bits) - k == 2:
                s, c = nl.add("HA", bits[k : k + 2], "reduce")
                nxt.setdefault(col, []).append(s)
                nxt.setdefault(col + 1, []).append(c)
            elif len(bits) - k == 1:
                nxt.setdefault(col, []).append(bits[k])
        columns = nxt

    # ripple-carry final adder
    sums: dict[int, int] = {}
    carry = None
    top = max(columns, default=-1)
    col = 0
    while col <= top or carry is not None:
        bits = list(columns.get(col, []))
        if carry is not None:
            bits.append(carry)
        carry = None
        if len(bits) == 1:
            sums[col] = bits[0]
        elif len(bits) == 2:
            sums[col], carry = nl.add("HA", bits, "final")
        elif len(bits) == 3:
            sums[col], carry = nl.add("FA", bits, "final")
        col += 1

    width = n + m
    outs = [sums.get(i, CONST0) for i in range(width)]
    high = [w for c, w in sorted(sums.items()) if c >= width]
    if high:
        flag = high[0]
        for w in high[1:]:
            flag = nl.add("OR", (flag, w), "saturate")[0]
        outs = [flag if w == CONST0 else nl.add("OR", (w, flag), "saturate")[0] for w in outs]
    nl.outputs = outs
    return nl


def simulate_netlist(netlist: Netlist, x, y):
    """Evaluate the netlist in gate order; accepts scalars or equal-shape arrays."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    shape = np.broadcast(x, y).shape
    v: list = [None] * netlist.n_wires
    v[CONST0] = np.zeros(shape, dtype=np.uint8)
    for i in range(netlist.n):
        v[netlist.x_wire(i)] = np.broadcast_to((x >> i) & 1, shape).astype(np.uint8)
    for i in range(netlist.m):
        v[netlist.y_wire(i)] = np.broadcast_to((y >> i) & 1, shape).astype(np.uint8)
    for g in netlist.gates:
        a = [v[w] for w in g.inputs]
        if g.kind == "AND":
            v[g.outputs[0]] = a[0] & a[1]
        elif g.kind == "OR":
            v[g.outputs[0]] = a[0] | a[1]
        elif g.kind == "XOR":
            v[g.outputs[0]] = a[0] ^ a[1]
        elif g.kind == "NOT":
            v[g.outputs[0]] = a[0] ^ 1
        elif g.kind == "HA":
            v[g.outputs[0]] = a[0] ^ a[1]
            v[g.outputs[1]] = a[0] & a[1]
        elif g.kind == "FA":
            v[g.outputs[0]] = a[0] ^ a[1] ^ a[2]
            v[g.outputs[1]] = (a[0] & a[1]) | (a[2] & (a[0] ^ a[1]))
    out = np.zeros(shape, dtype=np.int64)
    for i, w in enumerate(netlist.outputs):
        out |= v[w].astype(np.int64) << i
    return int(out) if out.ndim == 0 else out


@dataclass
class CostReport:
    selected_term_count: int
    pp_bit_count: int
    gate_count: dict[str, int]
    adder_count: dict[str, int]
    term_gate_count: int
    estimated_depth: int

    def to_dict(self) -> dict:
        return {
            "selected_term_count": self.selected_term_count,
            "pp_bit_count": self.pp_bit_count,
            "gate_count": dict(self.gate_count),
            "adder_count": dict(self.adder_count),
            "term_gate_count": self.term_gate_count,
            "estimated_depth": self.estimated_depth,
        }


def cost_report(space: SearchSpace, theta, netlist: Netlist | None = None) -> CostReport:
    """Structural cost proxy: counts and logic depth, no physical units."""
    theta = np.asarray(theta)
    netlist = netlist or emit_netlist(space, theta)
    uncompressed = (space.m - len(space.compressed_rows)) * space.n
    kinds = Counter(g.kind for g in netlist.gates)
    depth = {w: 0 for w in range(1 + netlist.n + netlist.m)}
    for g in netlist.gates:
        level = 1 + max(depth[w] for w in g.inputs)
        for w in g.outputs:
            depth[w] = level
    return CostReport(
        selected_term_count=int(np.count_nonzero(theta)),
        pp_bit_count=uncompressed + len(space.grouping.singles) + int(np.count_nonzero(theta)),
        gate_count={k: kinds.get(k, 0) for k in GATE_KINDS},
        adder_count={"half": kinds.get("HA", 0), "full": kinds.get("FA", 0)},
        term_gate_count=sum(1 for g in netlist.gates if g.role == "term"),
        estimated_depth=max((depth[w] for w in netlist.outputs), default=0),
    )


_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def emit_hdl(netlist: Netlist, module_name: str = "approx_mul") -> str:
    """Structural Verilog: one assign or adder instance per gate."""
    if not _IDENT.match(module_name):
        raise ValueError(f"invalid module name {module_name!r}")
    n, m = netlist.n, netlist.m

    def ref(w: int) -> str:
        if w == CONST0:
            return "1'b0"
        if 1 <= w <= n:
            return f"x[{w - 1}]"
        if n < w <= n + m:
            return f"y[{w - 1 - n}]"
        return f"w{w}"

    lines = [
        f"// {n}x{m} approximate multiplier, {len(netlist.gates)} gates",
        f"module {module_name} (",
        f"    input  wire [{n - 1}:0] x,",
        f"    input  wire [{m - 1}:0] y,",
        f"    output wire [{n + m - 1}:0] p",
        ");",
    ]
    driven = [w for g in netlist.gates for w in g.outputs]
    for w in driven:
        lines.append(f"    wire {ref(w)};")
    sym = {"AND": "&", "OR": "|", "XOR": "^"}
    for i, g in enumerate(netlist.gates):
        a = [ref(w) for w in g.inputs]
        o = [ref(w) for w in g.outputs]
        if g.kind in sym:
            lines.append(f"    assign {o[0]} = {a[0]} {sym[g.kind]} {a[1]};")
        elif g.kind == "NOT":
            lines.append(f"    assign {o[0]} = ~{a[0]};")
        elif g.kind == "HA":
            lines.append(f"    {module_name}_ha u{i} (.a({a[0]}), .b({a[1]}), .s({o[0]}), .c({o[1]}));")
        else:
            lines.append(f"    {module_name}_fa u{i} (.a({a[0]}), .b({a[1]}), .ci({a[2]}), .s({o[0]}), .co({o[1]}));")
    for i, w in enumerate(netlist.outputs):
        lines.append(f"    assign p[{i}] = {ref(w)};")
    lines += [
        "endmodule",
        "",
        f"module {module_name}_ha (input wire a, input wire b, output wire s, output wire c);",
        "    assign s = a ^ b;",
        "    assign c = a & b;",
        "endmodule",
        "",
        f"module {module_name}_fa (input wire a, input wire b, input wire ci, output wire s, output wire co);",
        "    assign s = a ^ b ^ ci;",
        "    assign co = (a & b) | (ci & (a ^ b));",
        "endmodule",
        "",
    ]
    return "\n".join(lines)

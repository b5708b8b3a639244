"""Turn a selection of terms into hardware artifacts.

Builds a compressed multiplier, emits its gate netlist, checks the netlist
against the lookup table on every operand pair, prints the cost proxy and
writes a Verilog file plus the binary LUT to a scratch directory.

    python demos/03_hardware_export.py [out_dir]
"""
import sys
import tempfile
from pathlib import Path

import numpy as np

from approxmul.lut import build_lut, exact_lut, save_lut
from approxmul.netlist import cost_report, emit_hdl, emit_netlist, simulate_netlist
from approxmul.ppmatrix import dnn_preset, operand_grid

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="approxmul-"))
out.mkdir(parents=True, exist_ok=True)

space = dnn_preset()
full = space.half_adder_theta()
# keep the terms that land in the upper columns, drop the low-order ones
trimmed = full.copy()
for i, t in enumerate(space.terms):
    if t.column < 6:
        trimmed[i] = 0

x, y = operand_grid(8, 8)
for name, theta in (("half-adder", full), ("trimmed", trimmed)):
    nl = emit_netlist(space, theta)
    lut = build_lut(space, theta)
    assert np.array_equal(simulate_netlist(nl, x, y), lut.entries.ravel())
    cost = cost_report(space, theta, nl)
    worst = int(np.abs(exact_lut().entries - lut.entries).max())
    print(f"{name:10s}: {cost.selected_term_count} terms, {cost.adder_count['full']} FA, "
          f"{cost.adder_count['half']} HA, depth {cost.estimated_depth}, max |error| {worst}")
    (out / f"{name}.v").write_text(emit_hdl(nl, f"mul8_{name.replace('-', '_')}"))
    save_lut(lut, out / f"{name}.lut")

print(f"wrote Verilog and LUT files to {out}")

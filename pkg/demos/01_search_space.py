"""Walk through the compressed partial-product model on a 4x4 multiplier.

Shows how the bit-matrix is grouped, what the search space looks like, and
how three choices of theta (nothing, the half-adder selection, a random one)
change the product.

    python demos/01_search_space.py
"""
import numpy as np

from approxmul.distribution import uniform
from approxmul.lut import build_lut, error_stats
from approxmul.ppmatrix import evaluate, make_space

space = make_space(4, 4)
print(f"4x4 multiplier, compressed rows {sorted(space.compressed_rows)}")
print(f"{len(space.grouping.pairs)} two-bit groups, {len(space.grouping.singles)} single bits, Z = {space.Z} candidate terms")

for g in space.grouping.groups:
    bits = " + ".join(f"x{b.col}*y{b.row}" for b in g.members)
    print(f"  group {g.id:2d} at column {g.base_column}: {bits}")

choices = {
    "no terms": np.zeros(space.Z, dtype=np.uint8),
    "half-adder": space.half_adder_theta(),
    "random": np.random.default_rng(0).integers(0, 2, space.Z).astype(np.uint8),
}
x, y = 13, 11
print(f"\nx={x} y={y}, exact product {x * y}")
for name, theta in choices.items():
    stats = error_stats(build_lut(space, theta), uniform(4, 4))
    print(f"  {name:10s} terms {int(theta.sum()):3d}  f = {evaluate(space, theta, x, y):4d}  "
          f"E_d(uniform) = {stats['expected_squared_error']:.1f}")

"""Fit a multiplier to the operand statistics of a small quantized CNN.

1. run the shipped digit classifier with exact arithmetic and record every
   multiplication's operands;
2. build the operand distribution from the two histograms;
3. run the genetic search on the 8x8 preset for that distribution and for a
   uniform one;
4. compare both multipliers by expected error and by network accuracy.

Takes a few seconds per search.

    python demos/02_optimize_for_a_network.py
"""
import numpy as np

from approxmul import data_path
from approxmul.approxflow.graph import accuracy_eval, load_dataset, load_model
from approxmul.approxflow.layers import MulBackend, Recorder
from approxmul.distribution import Histogram, mode, product_joint, uniform
from approxmul.ga import GAConfig, optimize
from approxmul.lut import build_lut
from approxmul.objective import ObjectiveConfig, expected_error
from approxmul.ppmatrix import dnn_preset

model = load_model(data_path("lenet_digits.graph.json"))
data = load_dataset(data_path("digits_test.json"))

rec = Recorder()
exact_acc = accuracy_eval(model, data.images, data.labels, record=rec)
hx, hw = (Histogram(8, c) for c in rec.merged())
print(f"exact accuracy {100 * exact_acc:.2f}% on {len(data)} images, {hx.total} multiplications")
print(f"activation mode {mode(hx)}, weight mode {mode(hw)}")
print(f"share of activations equal to 0: {hx.counts[0] / hx.total:.1%}")

space = dnn_preset()
dist = product_joint(hx, hw)
cfg = ObjectiveConfig(lambda1=1000.0)
runs = {
    "network": optimize(space, dist, cfg, GAConfig(seed=0)),
    "uniform": optimize(space, uniform(8, 8), cfg, GAConfig(seed=0)),
}

print(f"\nhalf-adder selection uses {int(space.half_adder_theta().sum())} of {space.Z} terms")
for name, res in runs.items():
    theta = res.best.theta
    acc = accuracy_eval(model, data.images, data.labels, MulBackend(build_lut(space, theta)))
    print(f"fit to {name:8s}: {int(theta.sum()):2d} terms, {res.generations_run} generations, "
          f"E_d(network) = {expected_error(space, theta, dist):9.1f}, "
          f"E_d(uniform) = {expected_error(space, theta, uniform(8, 8)):9.1f}, accuracy {100 * acc:.2f}%")

common = np.flatnonzero(runs["network"].best.theta & runs["uniform"].best.theta)
print(f"terms shared by both selections: {len(common)}")

"""Acceptance criteria, one test per criterion.

The terminal summary prints a PASS/FAIL line for each (see conftest.py).
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from approxmul import data_path
from approxmul.approxflow.archive import load_archive, save_archive
from approxmul.approxflow.graph import accuracy_eval, execute
from approxmul.approxflow.layers import MulBackend
from approxmul.cli import RunConfig, load_theta_file, main, run_optimize
from approxmul.distribution import (
    Histogram,
    load_distribution,
    load_histogram,
    product_joint,
    save_histogram,
    uniform,
)
from approxmul.ga import GAConfig, optimize
from approxmul.lut import build_lut, exact_lut, lut_to_bytes, lut_from_bytes, save_lut
from approxmul.netlist import emit_netlist, simulate_netlist
from approxmul.objective import ObjectiveConfig, expected_error, sampled_expected_error
from approxmul.ppmatrix import evaluate, operand_grid
from oracles import enumerate_optimum, micro_instances, naive_expected_error

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="module")
def concentrated():
    return load_distribution(data_path("lenet_digits.dist.json"))


@pytest.fixture(scope="module")
def paired_runs(tmp_path_factory):
    """theta_c under the fixture distribution and theta_u under uniform, same budget and lambda1."""
    out = tmp_path_factory.mktemp("c7")
    thetas = {}
    for tag in ("lenet", "uniform"):
        cfg = RunConfig.from_file(CONFIGS / f"dnn8x8_{tag}.json")
        cfg.output_dir = str(out / tag)
        run_optimize(cfg)
        thetas[tag] = load_theta_file(out / tag / "theta.json")
    return thetas


def test_c1_exact_reconstruction(preset, concentrated):
    t0 = time.perf_counter()
    x, y = operand_grid(8, 8)
    theta = preset.half_adder_theta()
    assert np.array_equal(evaluate(preset, theta, x, y), x * y)
    for dist in (uniform(8, 8), concentrated):
        assert expected_error(preset, theta, dist) == 0.0
    assert time.perf_counter() - t0 < 1.0


def test_c2_oracle_equivalence(space4):
    rng = np.random.default_rng(2)
    # integer weights: a uniform distribution scaled by 256 makes D exact
    p_int = uniform(4, 4).matrix()
    weighted = product_joint(Histogram(4, rng.integers(0, 40, 16)), Histogram(4, rng.integers(0, 40, 16)), 1.0)
    for _ in range(20):
        theta = rng.integers(0, 2, space4.Z)
        assert expected_error(space4, theta, uniform(4, 4)) * 256 == naive_expected_error(space4, theta, p_int * 256)
        got = expected_error(space4, theta, weighted)
        ref = naive_expected_error(space4, theta, weighted.matrix())
        assert abs(got - ref) <= 1e-9 * abs(ref)


def test_c3_netlist_fidelity(preset):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    x, y = operand_grid(8, 8)
    for _ in range(10):
        theta = rng.integers(0, 2, preset.Z)
        got = simulate_netlist(emit_netlist(preset, theta), x, y)
        assert np.array_equal(got, build_lut(preset, theta).entries.ravel())
    assert time.perf_counter() - t0 < 10.0


def test_c4_ga_micro_optimality():
    t0 = time.perf_counter()
    hits = 0
    for i, (space, dist, lam) in enumerate(micro_instances(20, seed=0)):
        assert space.Z <= 16
        opt = enumerate_optimum(space, dist.matrix(), lam)
        res = optimize(space, dist, ObjectiveConfig(lambda1=lam), GAConfig(max_generations=300, seed=i))
        hits += abs(res.best.fitness - opt) <= 1e-9 * max(1.0, opt)
    print(f"GA matched the enumerated optimum on {hits}/20 micro-instances")
    assert hits >= 19
    assert time.perf_counter() - t0 < 120.0


def test_c5_ga_contracts(tmp_path, space4):
    for seed in range(5):
        res = optimize(space4, uniform(4, 4), ObjectiveConfig(lambda1=40.0),
                       GAConfig(population_size=30, max_generations=60, seed=seed))
        assert all(b <= a for a, b in zip(res.history, res.history[1:]))
    cfg = CONFIGS / "dnn8x8_uniform.json"
    blobs = []
    for run in ("a", "b"):
        assert main(["optimize", "--config", str(cfg), "--generations", "20", "--out", str(tmp_path / run)]) == 0
        blobs.append((tmp_path / run / "theta.json").read_bytes())
    assert blobs[0] == blobs[1]


def test_c6_sampling_consistency(preset, concentrated):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    ha = preset.half_adder_theta()
    drop = ha.copy()
    drop[np.flatnonzero(ha)[::3]] = 0
    grid = np.arange(256)
    peaked = product_joint(Histogram(8, (1e6 * np.exp(-grid / 20.0)).astype(np.int64)),
                           Histogram(8, (1e6 * np.exp(-(((grid - 128) / 15.0) ** 2))).astype(np.int64)), 1.0)
    pairs = [
        (drop, concentrated),
        (rng.integers(0, 2, preset.Z), concentrated),
        (rng.integers(0, 2, preset.Z), uniform(8, 8)),
        (np.zeros(preset.Z, dtype=np.uint8), uniform(8, 8)),
        (drop, peaked),
    ]
    for k, (theta, dist) in enumerate(pairs):
        ex = expected_error(preset, theta, dist)
        sa = sampled_expected_error(preset, theta, dist, 1 << 17, seed=600 + k)
        print(f"pair {k}: exhaustive {ex:.6g} sampled {sa:.6g} rel {abs(sa - ex) / ex:.4f}")
        assert abs(sa - ex) <= 0.05 * ex
    assert time.perf_counter() - t0 < 5.0


def test_c7_distribution_awareness(preset, concentrated, paired_runs):
    t0 = time.perf_counter()
    _, theta_c = paired_runs["lenet"]
    _, theta_u = paired_runs["uniform"]
    e_c = expected_error(preset, theta_c, concentrated)
    e_u = expected_error(preset, theta_u, concentrated)
    print(f"under the fixture distribution: E_d(theta_c) = {e_c:.6g} ({int(theta_c.sum())} terms), "
          f"E_d(theta_u) = {e_u:.6g} ({int(theta_u.sum())} terms)")
    assert e_c < e_u
    assert time.perf_counter() - t0 < 600.0


def test_c8_backend_equivalence(lenet, digits):
    assert len(digits) >= 500
    exact, lut = MulBackend(), MulBackend(exact_lut())
    x = digits.images
    a = execute(lenet, x, exact)
    b = execute(lenet, x, lut)
    assert np.array_equal(a, b)
    # intermediate tensors too, by cutting the graph at the last dense layer
    lenet_fc = type(lenet)(lenet.nodes, lenet.input_id, lenet.input_shape, lenet.input_qparams, "fc2", lenet.tensors)
    assert np.array_equal(execute(lenet_fc, x, exact).data, execute(lenet_fc, x, lut).data)
    assert accuracy_eval(lenet, x, digits.labels, exact) == accuracy_eval(lenet, x, digits.labels, lut)


def test_c9_negligible_accuracy_loss(preset, lenet, digits, paired_runs):
    space, theta_c = paired_runs["lenet"]
    base = accuracy_eval(lenet, digits.images, digits.labels)
    approx = accuracy_eval(lenet, digits.images, digits.labels, MulBackend(build_lut(space, theta_c)))
    print(f"exact {100 * base:.2f}%  theta_c {100 * approx:.2f}%  terms {int(theta_c.sum())} "
          f"vs half-adder {int(preset.half_adder_theta().sum())}")
    assert 100 * (base - approx) <= 1.0
    assert theta_c.sum() < preset.half_adder_theta().sum()


def test_c10_format_round_trips(tmp_path, rng, preset):
    # LUT binary
    lut = build_lut(preset, rng.integers(0, 2, preset.Z))
    blob = lut_to_bytes(lut)
    assert lut_to_bytes(lut_from_bytes(blob)) == blob
    # histogram JSON
    src = data_path("lenet_digits.weights.hist.json")
    save_histogram(load_histogram(src), tmp_path / "h.json")
    assert (tmp_path / "h.json").read_bytes() == src.read_bytes()
    # tensor archive
    man = data_path("lenet_digits.tensors.json")
    save_archive(load_archive(man), tmp_path / "lenet_digits.tensors.json")
    assert (tmp_path / "lenet_digits.tensors.json").read_bytes() == man.read_bytes()
    assert (tmp_path / "lenet_digits.tensors.bin").read_bytes() == man.with_suffix(".bin").read_bytes()

    # corrupted headers exit with code 2
    bad_lut = tmp_path / "bad.lut"
    bad_lut.write_bytes(b"AMLUT2\0\0" + blob[8:])
    assert main(["eval", "--lut", str(bad_lut)]) == 2
    short = tmp_path / "short.lut"
    save_lut(lut, short)
    short.write_bytes(short.read_bytes()[:-2])
    assert main(["eval", "--lut", str(short)]) == 2

    bad_hist = tmp_path / "bad.dist.json"
    d = json.loads(data_path("lenet_digits.dist.json").read_text())
    d["px"]["counts"][5] = -1
    bad_hist.write_text(json.dumps(d))
    assert main(["compare", "exact", "--distribution", str(bad_hist)]) == 2

    graph = json.loads(data_path("lenet_digits.graph.json").read_text())
    m = json.loads(man.read_text())
    m["format"] = "tensor-archive-0"
    (tmp_path / "lenet_digits.tensors.json").write_text(json.dumps(m))
    (tmp_path / "g.graph.json").write_text(json.dumps(graph))
    assert main(["eval", "--model", str(tmp_path / "g.graph.json")]) == 2

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from approxmul import data_path
from approxmul.distribution import Histogram, load_distribution, point_mass, product_joint, uniform
from approxmul.objective import (
    ErrorEvaluator,
    ObjectiveConfig,
    expected_error,
    objective,
    penalty,
    sampled_expected_error,
    squared_error,
)
from approxmul.ppmatrix import enumerate_search_space, make_space, operand_grid, vertical_grouping
from oracles import naive_expected_error


@pytest.fixture(scope="module")
def bare4():
    """4x4, every row compressed, no single-bit groups: theta = 0 gives f = 0."""
    return enumerate_search_space(4, 4, vertical_grouping(4, 4, range(4)))


def test_squared_error_examples(bare4, preset):
    assert squared_error(bare4, np.zeros(bare4.Z), 3, 3) == 81
    x, y = operand_grid(8, 8)
    assert not np.any(squared_error(preset, preset.half_adder_theta(), x, y))
    assert squared_error(preset, np.ones(preset.Z), 0, 200) == 0


def test_expected_error_closed_form(bare4):
    # E[x^2 y^2] = E[x^2]^2 for independent uniform 4-bit operands
    assert sum(k * k for k in range(16)) == 1240
    assert expected_error(bare4, np.zeros(bare4.Z), uniform(4, 4)) == pytest.approx((1240 / 16) ** 2, rel=1e-12)
    assert naive_expected_error(bare4, np.zeros(bare4.Z), uniform(4, 4).matrix()) == pytest.approx(6006.25, rel=1e-12)


def test_expected_error_half_adder_zero(preset):
    for dist in (uniform(8, 8), load_distribution(data_path("lenet_digits.dist.json"))):
        assert expected_error(preset, preset.half_adder_theta(), dist) == 0.0


def test_expected_error_point_mass(preset, rng):
    theta = rng.integers(0, 2, preset.Z)
    d = point_mass(8, 8, 91, 140)
    assert expected_error(preset, theta, d) == squared_error(preset, theta, 91, 140)


def test_expected_error_width_mismatch(preset):
    with pytest.raises(ValueError):
        expected_error(preset, np.zeros(preset.Z), uniform(4, 4))


def test_oracle_equivalence_random(space4, rng):
    h = Histogram(4, rng.integers(0, 50, 16))
    dist = product_joint(h, Histogram(4, rng.integers(0, 50, 16)), 1.0)
    for _ in range(3):
        theta = rng.integers(0, 2, space4.Z)
        got = expected_error(space4, theta, dist)
        assert got == pytest.approx(naive_expected_error(space4, theta, dist.matrix()), rel=1e-9)


def test_penalty():
    assert penalty(np.zeros(10), 3.0) == 0
    assert penalty(np.array([1] * 6 + [0] * 4), 0.5) == 3.0
    assert penalty(np.ones(10), 0.0) == 0


def test_objective_half_adder(preset):
    theta = preset.half_adder_theta()
    dist = uniform(8, 8)
    assert objective(preset, theta, dist, ObjectiveConfig(lambda1=0)) == 0
    assert objective(preset, theta, dist, ObjectiveConfig(lambda1=1)) == theta.sum()


def test_objective_sampled_vs_exhaustive(preset):
    dist = load_distribution(data_path("lenet_digits.dist.json"))
    theta = preset.half_adder_theta().copy()
    theta[np.flatnonzero(theta)[:6]] = 0
    ex = objective(preset, theta, dist, ObjectiveConfig(lambda1=0))
    sa = objective(preset, theta, dist, ObjectiveConfig(lambda1=0, mode="sampled", samples=65536, seed=7))
    assert abs(sa - ex) / ex < 0.05


def test_sampled_point_mass(preset, rng):
    theta = rng.integers(0, 2, preset.Z)
    d = point_mass(8, 8, 17, 3)
    for s in (1, 10, 1000):
        assert sampled_expected_error(preset, theta, d, s, seed=s) == pytest.approx(squared_error(preset, theta, 17, 3), rel=1e-12)


def test_sampled_half_adder_zero(preset):
    assert sampled_expected_error(preset, preset.half_adder_theta(), uniform(8, 8), 5000, 3) == 0


def test_sampled_uniform_within_three_sigma(bare4):
    S = 100_000
    theta = np.zeros(bare4.Z)
    est = sampled_expected_error(bare4, theta, uniform(4, 4), S, seed=2024)
    xs, ys = uniform(4, 4).sample(S, np.random.default_rng(2024))
    sigma = np.std((xs * ys).astype(float) ** 2, ddof=1) / np.sqrt(S)
    assert abs(est - 6006.25) < 3 * sigma


def test_sampled_requires_samples(preset):
    with pytest.raises(ValueError):
        sampled_expected_error(preset, np.zeros(preset.Z), uniform(8, 8), 0, 1)
    with pytest.raises(ValueError):
        ObjectiveConfig(mode="sampled", samples=0)


def test_sampling_determinism(preset, rng):
    theta = rng.integers(0, 2, preset.Z)
    d = uniform(8, 8)
    a = sampled_expected_error(preset, theta, d, 4096, 99)
    b = sampled_expected_error(preset, theta, d, 4096, 99)
    assert a == b


def test_batch_independent_of_chunking(preset, rng):
    thetas = rng.integers(0, 2, (13, preset.Z))
    ev = ErrorEvaluator.exhaustive(preset, uniform(8, 8))
    one = np.array([ev.error(t) for t in thetas])
    ev.chunk = 5
    assert np.array_equal(ev.errors(thetas), one)


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_nonnegative_and_lambda_monotone(data):
    space = make_space(3, 3)
    theta = np.array(data.draw(st.lists(st.integers(0, 1), min_size=space.Z, max_size=space.Z)))
    l1, l2 = sorted(data.draw(st.lists(st.floats(0, 1e4), min_size=2, max_size=2)))
    d = uniform(3, 3)
    assert expected_error(space, theta, d) >= 0
    assert objective(space, theta, d, ObjectiveConfig(lambda1=l1)) <= objective(space, theta, d, ObjectiveConfig(lambda1=l2))

import numpy as np
import pytest

from approxmul.distribution import uniform
from approxmul.ga import (
    GAConfig,
    init_population,
    mutate,
    optimize,
    theta_document,
    tournament_select,
    uniform_crossover,
)
from approxmul.objective import ObjectiveConfig, expected_error, objective
from approxmul.ppmatrix import make_space
from oracles import enumerate_optimum, micro_instances


def test_micro_instance_matches_enumeration():
    space = make_space(2, 2)
    assert space.Z <= 16
    d = uniform(2, 2)
    opt = enumerate_optimum(space, d.matrix(), 0.0)
    res = optimize(space, d, ObjectiveConfig(lambda1=0.0), GAConfig(max_generations=200))
    assert res.best.fitness == pytest.approx(opt, abs=1e-12)


def test_reaches_zero_with_half_adder():
    space = make_space(4, 4)
    res = optimize(space, uniform(4, 4), ObjectiveConfig(lambda1=0.0), GAConfig(max_generations=20, population_size=20))
    assert res.best.fitness == 0.0


def test_best_fitness_is_its_objective(space4):
    d = uniform(4, 4)
    cfg = ObjectiveConfig(lambda1=3.0)
    res = optimize(space4, d, cfg, GAConfig(max_generations=15, population_size=16, seed=5))
    assert res.best.fitness == pytest.approx(objective(space4, res.best.theta, d, cfg), rel=1e-12)
    assert res.best.fitness == min(res.history)


def test_determinism(space4):
    d = uniform(4, 4)
    cfg = GAConfig(max_generations=25, population_size=20, seed=11)
    a = optimize(space4, d, ObjectiveConfig(lambda1=50.0), cfg)
    b = optimize(space4, d, ObjectiveConfig(lambda1=50.0), cfg)
    assert np.array_equal(a.best.theta, b.best.theta)
    assert a.history == b.history and a.mean_history == b.mean_history
    assert theta_document(space4, a.best.theta) == theta_document(space4, b.best.theta)


def test_history_non_increasing_and_budget(space4):
    for seed in range(4):
        cfg = GAConfig(max_generations=30, population_size=12, seed=seed, stall_generations=8)
        res = optimize(space4, uniform(4, 4), ObjectiveConfig(lambda1=20.0), cfg)
        assert all(b <= a for a, b in zip(res.history, res.history[1:]))
        assert res.generations_run == len(res.history) <= 30
        assert res.evaluations_count == cfg.population_size * res.generations_run
        assert res.unique_evaluations <= res.evaluations_count


def test_stall_stops_early(space4):
    res = optimize(space4, uniform(4, 4), ObjectiveConfig(lambda1=0.0), GAConfig(max_generations=300, stall_generations=5))
    # the warm start is already optimal, so nothing ever improves
    assert res.generations_run == 6


def test_empty_space_rejected():
    space = make_space(4, 4, compressed_rows=[])
    assert space.Z == 0
    with pytest.raises(ValueError):
        optimize(space, uniform(4, 4))


def test_init_population(rng):
    pop = init_population(24, GAConfig(population_size=10), rng)
    assert pop.shape == (10, 24)
    assert not pop[0].any()
    warm = np.ones(24, dtype=np.uint8)
    pop = init_population(24, GAConfig(population_size=10), np.random.default_rng(0), warm)
    assert pop[1].all()
    a = init_population(64, GAConfig(population_size=10), np.random.default_rng(1))
    b = init_population(64, GAConfig(population_size=10), np.random.default_rng(2))
    assert not np.array_equal(a[2:], b[2:])
    big = init_population(1000, GAConfig(population_size=50), np.random.default_rng(3))
    assert abs(big[2:].mean() - 0.5) < 0.01


def test_tournament(rng):
    fit = np.array([5.0, 1.0, 3.0, 4.0])
    for _ in range(20):
        assert tournament_select(fit, 200, rng) == 1
    tied = np.array([2.0, 2.0, 2.0])
    for _ in range(20):
        winner = tournament_select(tied, 50, rng)
        assert winner == 0


def test_crossover_and_mutation(rng):
    a = rng.integers(0, 2, 40).astype(np.uint8)
    b = rng.integers(0, 2, 40).astype(np.uint8)
    c1, c2 = uniform_crossover(a, a, 1.0, rng)
    assert np.array_equal(c1, a) and np.array_equal(c2, a)
    c1, c2 = uniform_crossover(a, b, 0.0, rng)
    assert np.array_equal(c1, a) and np.array_equal(c2, b)
    c1, c2 = uniform_crossover(a, b, 1.0, rng)
    assert np.array_equal(np.sort(np.stack([c1, c2]), axis=0), np.sort(np.stack([a, b]), axis=0))
    assert np.array_equal(mutate(a, 0.0, rng), a)
    assert np.array_equal(mutate(a, 1.0, rng), 1 - a)


def test_config_validation():
    for bad in ({"elite_count": 100}, {"elite_count": 0}, {"tournament_size": 1},
                {"crossover_rate": 1.5}, {"mutation_rate": -0.1}, {"population_size": 1}):
        with pytest.raises(ValueError):
            GAConfig(**bad)
    assert GAConfig().mutation_for(672) == 1 / 672
    assert GAConfig.from_dict(GAConfig(seed=9).to_dict()) == GAConfig(seed=9)


def test_history_csv(space4):
    res = optimize(space4, uniform(4, 4), ObjectiveConfig(lambda1=10.0), GAConfig(max_generations=3, population_size=6))
    lines = res.history_csv().splitlines()
    assert lines[0] == "generation,best_fitness,mean_fitness,best_popcount"
    assert len(lines) == 1 + res.generations_run


@pytest.mark.slow
def test_micro_instances_mostly_optimal():
    hits = 0
    for space, dist, lam in micro_instances(20, seed=0)[:8]:
        opt = enumerate_optimum(space, dist.matrix(), lam)
        res = optimize(space, dist, ObjectiveConfig(lambda1=lam), GAConfig())
        hits += res.best.fitness == pytest.approx(opt, rel=1e-9, abs=1e-12)
        assert expected_error(space, res.best.theta, dist) >= 0
    assert hits >= 7

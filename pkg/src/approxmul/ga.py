"""Binary genetic algorithm over theta vectors.

Semantics are fixed so that a run is reproducible from its seed:

* generation 0 is i.i.d. Bernoulli(0.5), with individual 0 forced to all
  zeros and individual 1 to the half-adder theta when the space has one;
* each later generation keeps ``elite_count`` best individuals, then fills up
  with children of two tournament winners (uniform crossover, per-bit flip
  mutation);
* ties are always broken by lower population index;
* the run stops after ``max_generations`` or after ``stall_generations``
  generations without a strictly better best fitness.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .distribution import OperandDistribution
from .objective import ErrorEvaluator, ObjectiveConfig, make_evaluator
from .ppmatrix import SearchSpace


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 100
    max_generations: int = 300
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None -> 1/Z
    tournament_size: int = 3
    elite_count: int = 2
    seed: int = 0
    stall_generations: int = 50

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if not 1 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must be in [1, population_size)")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be at least 2")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must be in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")
        if self.max_generations < 1 or self.stall_generations < 1:
            raise ValueError("generation limits must be positive")

    def mutation_for(self, Z: int) -> float:
        return 1.0 / Z if self.mutation_rate is None else self.mutation_rate

    @classmethod
    def from_dict(cls, d: dict) -> "GAConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Individual:
    theta: np.ndarray
    fitness: float


@dataclass
class GAResult:
    best: Individual
    history: list[float]
    mean_history: list[float] = field(default_factory=list)
    popcount_history: list[int] = field(default_factory=list)
    generations_run: int = 0
    evaluations_count: int = 0
    unique_evaluations: int = 0

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["generation", "best_fitness", "mean_fitness", "best_popcount"])
        for g, (b, mu, pc) in enumerate(zip(self.history, self.mean_history, self.popcount_history)):
            w.writerow([g, repr(float(b)), repr(float(mu)), pc])
        return buf.getvalue()


def init_population(Z: int, cfg: GAConfig, rng: np.random.Generator, warm: np.ndarray | None = None) -> np.ndarray:
    pop = (rng.random((cfg.population_size, Z)) < 0.5).astype(np.uint8)
    pop[0] = 0
    if warm is not None:
        pop[1] = warm
    return pop


def tournament_select(fitness: np.ndarray, k: int, rng: np.random.Generator) -> int:
    entrants = rng.integers(0, len(fitness), size=k)
    # lexsort: primary key fitness, secondary index
    order = np.lexsort((entrants, fitness[entrants]))
    return int(entrants[order[0]])


def uniform_crossover(a: np.ndarray, b: np.ndarray, rate: float, rng: np.random.Generator):
    if rng.random() >= rate:
        return a.copy(), b.copy()
    swap = rng.random(len(a)) < 0.5
    return np.where(swap, b, a), np.where(swap, a, b)


def mutate(theta: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    flips = rng.random(len(theta)) < rate
    return theta ^ flips.astype(theta.dtype)


class _CachedFitness:
    def __init__(self, evaluator: ErrorEvaluator, lambda1: float):
        self.evaluator = evaluator
        self.lambda1 = lambda1
        self.cache: dict[bytes, float] = {}
        self.lookups = 0

    def __call__(self, pop: np.ndarray) -> np.ndarray:
        self.lookups += len(pop)
        keys = [row.tobytes() for row in pop]
        todo = {}
        for i, k in enumerate(keys):
            if k not in self.cache and k not in todo:
                todo[k] = i
        if todo:
            idx = list(todo.values())
            errs = self.evaluator.errors(pop[idx])
            for k, i, e in zip(todo, idx, errs):
                self.cache[k] = float(e) + self.lambda1 * int(pop[i].sum())
        return np.array([self.cache[k] for k in keys])


def optimize(
    space: SearchSpace,
    dist: OperandDistribution,
    obj_cfg: ObjectiveConfig = ObjectiveConfig(),
    ga_cfg: GAConfig = GAConfig(),
    evaluator: ErrorEvaluator | None = None,
) -> GAResult:
    """Minimize expected squared error plus ``lambda1 * popcount`` over theta."""
    Z = space.Z
    if Z == 0:
        raise ValueError("search space is empty (Z=0); nothing to optimize")
    rng = np.random.default_rng(ga_cfg.seed)
    fitness_of = _CachedFitness(evaluator or make_evaluator(space, dist, obj_cfg), obj_cfg.lambda1)
    pmut = ga_cfg.mutation_for(Z)

    pop = init_population(Z, ga_cfg, rng, warm=space.half_adder_theta())
    fit = fitness_of(pop)
    best_i = int(np.argmin(fit))
    best = Individual(pop[best_i].copy(), float(fit[best_i]))
    result = GAResult(best=best, history=[])

    def record():
        result.history.append(best.fitness)
        result.mean_history.append(float(fit.mean()))
        result.popcount_history.append(int(best.theta.sum()))

    record()
    stall = 0
    for _ in range(1, ga_cfg.max_generations):
        if stall >= ga_cfg.stall_generations:
            break
        order = np.argsort(fit, kind="stable")
        nxt = [pop[i].copy() for i in order[: ga_cfg.elite_count]]
        while len(nxt) < ga_cfg.population_size:
            a = pop[tournament_select(fit, ga_cfg.tournament_size, rng)]
            b = pop[tournament_select(fit, ga_cfg.tournament_size, rng)]
            c1, c2 = uniform_crossover(a, b, ga_cfg.crossover_rate, rng)
            nxt.append(mutate(c1, pmut, rng))
            if len(nxt) < ga_cfg.population_size:
                nxt.append(mutate(c2, pmut, rng))
        pop = np.array(nxt, dtype=np.uint8)
        fit = fitness_of(pop)
        gi = int(np.argmin(fit))
        if fit[gi] < best.fitness:
            best = Individual(pop[gi].copy(), float(fit[gi]))
            stall = 0
        else:
            stall += 1
        record()

    result.best = best
    result.generations_run = len(result.history)
    result.evaluations_count = fitness_of.lookups
    result.unique_evaluations = len(fitness_of.cache)
    return result


def theta_document(space: SearchSpace, theta, extra: dict | None = None) -> str:
    """JSON text for a theta file: the space plus the selection bits."""
    doc = {"space": space.to_dict(), "theta": "".join(str(int(b)) for b in theta)}
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"

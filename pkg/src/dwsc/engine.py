"""Generational GA over service sequences with elitism and local search."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .decode import Chromosome, CompositionDag, InfeasibleSequence, backward_decode, reduce
from .model import Repository, Task
from .operators import (
    dg_index_crossover,
    dg_lcs_crossover,
    dg_two_point_crossover,
    index_crossover,
    local_search,
    mutate,
)
from .qos import NormBounds, QosBreakdown, fitness, norm_bounds

WORST_FITNESS = 1.0


class ConfigurationError(ValueError):
    pass


class CrossoverKind(str, Enum):
    INDEX = "index"
    DG_INDEX = "dg_index"
    DG_TWO_POINT = "dg_two_point"
    DG_LCS = "dg_lcs"

    @classmethod
    def parse(cls, name: str) -> "CrossoverKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).replace("-", "_"))
        except ValueError:
            raise ConfigurationError(f"unknown crossover kind {name!r}") from None


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    generations: int = 100
    p_crossover: float = 0.95
    p_mutation: float = 0.05
    p_local_search: float = 0.05
    tournament_size: int = 2
    elitism: int = 2
    neighborhood_size: int = 10
    crossover_kind: CrossoverKind = CrossoverKind.DG_LCS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "crossover_kind", CrossoverKind.parse(self.crossover_kind))
        for name in ("p_crossover", "p_mutation", "p_local_search"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1], got {p}")
        if self.population_size < 1:
            raise ConfigurationError("population_size must be >= 1")
        if self.generations < 0:
            raise ConfigurationError("generations must be >= 0")
        if self.tournament_size < 1:
            raise ConfigurationError("tournament_size must be >= 1")
        if not 0 <= self.elitism <= self.population_size:
            raise ConfigurationError("elitism must be between 0 and population_size")
        if self.neighborhood_size < 1:
            raise ConfigurationError("neighborhood_size must be >= 1")


@dataclass(frozen=True)
class Individual:
    chromosome: Chromosome
    fitness: float
    dag: CompositionDag | None
    qos: QosBreakdown | None = None


@dataclass(frozen=True)
class RunResult:
    best_per_generation: tuple[float, ...]
    final_best: Individual
    seed: int
    wall_time: float = field(default=0.0, compare=False)


STREAMS = ("init", "selection", "crossover", "mutation", "local_search")


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators per operator, all derived from one root seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


class Evaluator:
    """Decodes, reduces and scores chromosomes, memoising by gene tuple."""

    def __init__(self, repo: Repository, task: Task, bounds: NormBounds | None = None):
        self.repo = repo
        self.task = task
        self.bounds = bounds or norm_bounds(repo, task)
        self._cache: dict[Chromosome, Individual] = {}

    def __call__(self, chromosome) -> Individual:
        key = tuple(chromosome)
        ind = self._cache.get(key)
        if ind is None:
            try:
                result = backward_decode(self.repo, self.task, key)
            except InfeasibleSequence:
                ind = Individual(key, WORST_FITNESS, None)
            else:
                q = fitness(self.repo, self.task, result.dag, self.bounds)
                ind = Individual(reduce(key, result), q.fitness, result.dag, q)
            self._cache[key] = ind
        return ind

    def score(self, chromosome) -> float:
        return self(chromosome).fitness


def init_population(repo: Repository, task: Task, config: GaConfig,
                    rng: np.random.Generator, evaluator: Evaluator | None = None) -> list[Individual]:
    """Random permutations of the whole repository, decoded and reduced."""
    evaluator = evaluator or Evaluator(repo, task)
    ids = repo.service_ids
    try:
        backward_decode(repo, task, ids)
    except InfeasibleSequence as exc:
        raise ConfigurationError(f"task is unsolvable with the full repository: {exc}") from exc
    population = []
    for _ in range(config.population_size):
        order = rng.permutation(len(ids))
        population.append(evaluator(tuple(ids[k] for k in order)))
    return population


def tournament_select(population: list[Individual], tournament_size: int,
                      rng: np.random.Generator) -> Individual:
    """Best of ``tournament_size`` draws with replacement; the earliest draw wins ties."""
    picks = rng.integers(0, len(population), size=tournament_size)
    best = population[picks[0]]
    for k in picks[1:]:
        if population[k].fitness < best.fitness:
            best = population[k]
    return best


def _crossover_fn(repo: Repository, kind: CrossoverKind) -> Callable:
    if kind is CrossoverKind.INDEX:
        return lambda a, b, rng: index_crossover(a, b, rng)
    fn = {
        CrossoverKind.DG_INDEX: dg_index_crossover,
        CrossoverKind.DG_TWO_POINT: dg_two_point_crossover,
        CrossoverKind.DG_LCS: dg_lcs_crossover,
    }[kind]
    return lambda a, b, rng: fn(repo, a, b)


def _best(population: list[Individual]) -> Individual:
    return min(population, key=lambda ind: ind.fitness)


def evolve(repo: Repository, task: Task, config: GaConfig,
           on_generation: Callable[[int, Individual], None] | None = None) -> RunResult:
    started = time.perf_counter()
    rngs = make_streams(config.seed)
    evaluator = Evaluator(repo, task)
    population = init_population(repo, task, config, rngs["init"], evaluator)
    crossover = _crossover_fn(repo, config.crossover_kind)
    n_new = config.population_size - config.elitism
    history = []

    for gen in range(config.generations):
        ranked = sorted(range(len(population)), key=lambda i: population[i].fitness)
        elite = [population[i] for i in ranked[:config.elitism]]

        children: list[Chromosome] = []
        while len(children) < n_new:
            a = tournament_select(population, config.tournament_size, rngs["selection"])
            b = tournament_select(population, config.tournament_size, rngs["selection"])
            if rngs["crossover"].random() < config.p_crossover:
                pair = crossover(a.chromosome, b.chromosome, rngs["crossover"])
            else:
                pair = (a.chromosome, b.chromosome)
            for child in pair:
                if rngs["mutation"].random() < config.p_mutation:
                    child = mutate(repo, child, rngs["mutation"])
                children.append(child)
        offspring = [evaluator(c) for c in children[:n_new]]

        ls_rng = rngs["local_search"]
        for _ in range(len(offspring)):
            if ls_rng.random() < config.p_local_search:
                picks = ls_rng.integers(0, len(offspring), size=config.tournament_size)
                idx = int(picks[0])
                for k in picks[1:]:
                    if offspring[k].fitness < offspring[idx].fitness:
                        idx = int(k)
                improved = local_search(repo, task, offspring[idx].chromosome,
                                        config.neighborhood_size, ls_rng,
                                        score=evaluator.score)
                offspring[idx] = evaluator(improved)

        population = elite + offspring
        best = _best(population)
        history.append(best.fitness)
        if on_generation is not None:
            on_generation(gen, best)

    return RunResult(
        best_per_generation=tuple(history),
        final_best=_best(population),
        seed=config.seed,
        wall_time=time.perf_counter() - started,
    )

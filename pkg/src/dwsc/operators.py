"""Variable-length operators on service sequences.

Crossovers embed one parent (or interleave parts of both) so that every child
keeps the full gene set of at least one parent; duplicates are dropped keeping
the first occurrence. The distance-guided variants cut where consecutive
services sit on the farthest-apart servers.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .decode import Chromosome, InfeasibleSequence, backward_decode
from .model import Repository, Task
from .qos import NormBounds, fitness, norm_bounds


def dedup(genes) -> Chromosome:
    return tuple(dict.fromkeys(genes))


def gaps(repo: Repository, chromosome: Sequence[str]) -> list[float]:
    """Distance between each pair of consecutive genes; entry k-1 is the gap at cut k."""
    return [repo.service_distance(a, b) for a, b in zip(chromosome, chromosome[1:])]


def max_gap_split(repo: Repository, chromosome: Sequence[str], k: int = 1,
                  allowed: Callable[[int], bool] | None = None) -> list[int]:
    """Cut indices at the ``k`` widest gaps, ascending; ties go to the lower index.

    A cut at index ``i`` separates ``chromosome[:i]`` from ``chromosome[i:]``.
    ``allowed`` can veto individual cut indices. Raises ValueError when fewer
    than ``k`` cuts are available.
    """
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    if len(chromosome) < 2:
        raise ValueError("need at least two genes to split")
    cuts = [(d, i) for i, d in enumerate(gaps(repo, chromosome), start=1)
            if allowed is None or allowed(i)]
    if len(cuts) < k:
        raise ValueError(f"only {len(cuts)} admissible cut points, need {k}")
    cuts.sort(key=lambda t: (-t[0], t[1]))
    return sorted(i for _, i in cuts[:k])


def embed(p1: Sequence[str], p2: Sequence[str], cut1: int, cut2: int) -> tuple[Chromosome, Chromosome]:
    """Each parent is wrapped by the prefix and suffix of the other at the given cuts."""
    p1, p2 = tuple(p1), tuple(p2)
    child1 = dedup(p1[:cut1] + p2 + p1[cut1:])
    child2 = dedup(p2[:cut2] + p1 + p2[cut2:])
    return child1, child2


def index_crossover(p1: Sequence[str], p2: Sequence[str], rng: np.random.Generator):
    if len(p1) < 2 or len(p2) < 2:
        return tuple(p1), tuple(p2)
    cut1 = int(rng.integers(1, len(p1)))
    cut2 = int(rng.integers(1, len(p2)))
    return embed(p1, p2, cut1, cut2)


def dg_index_crossover(repo: Repository, p1: Sequence[str], p2: Sequence[str]):
    if len(p1) < 2 or len(p2) < 2:
        return tuple(p1), tuple(p2)
    (cut1,) = max_gap_split(repo, p1, 1)
    (cut2,) = max_gap_split(repo, p2, 1)
    return embed(p1, p2, cut1, cut2)


def dg_two_point_crossover(repo: Repository, p1: Sequence[str], p2: Sequence[str]):
    if len(p1) < 3 or len(p2) < 3:
        return dg_index_crossover(repo, p1, p2)
    p1, p2 = tuple(p1), tuple(p2)
    i1, i2 = max_gap_split(repo, p1, 2)
    j1, j2 = max_gap_split(repo, p2, 2)
    a = (p1[:i1], p1[i1:i2], p1[i2:])
    b = (p2[:j1], p2[j1:j2], p2[j2:])
    child1 = dedup(a[0] + b[0] + a[1] + b[1] + a[2] + b[2])
    child2 = dedup(b[0] + a[0] + b[1] + a[1] + b[2] + a[2])
    return child1, child2


def lcs_positions(p1: Sequence[str], p2: Sequence[str]) -> list[tuple[int, int]]:
    """Matched (i, j) index pairs of a longest common subsequence.

    Among all longest ones, returns the one whose positions in ``p1`` are
    lexicographically smallest. Genes are assumed unique within each parent.
    """
    n, m = len(p1), len(p2)
    # suffix table: dp[i][j] = LCS length of p1[i:] and p2[j:]
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, below = dp[i], dp[i + 1]
        a = p1[i]
        for j in range(m - 1, -1, -1):
            if a == p2[j]:
                row[j] = below[j + 1] + 1
            else:
                row[j] = max(below[j], row[j + 1])
    where = {g: j for j, g in enumerate(p2)}
    pairs = []
    i, j, r = 0, 0, dp[0][0]
    while r > 0:
        while True:
            jj = where.get(p1[i])
            if jj is not None and jj >= j and dp[i + 1][jj + 1] == r - 1:
                break
            i += 1
        pairs.append((i, jj))
        i, j, r = i + 1, jj + 1, r - 1
    return pairs


def lcs(p1: Sequence[str], p2: Sequence[str]) -> list[str]:
    return [p1[i] for i, _ in lcs_positions(p1, p2)]


def dg_lcs_crossover(repo: Repository, p1: Sequence[str], p2: Sequence[str]):
    """Distance-guided embedding whose cuts never split the common subsequence."""
    if len(p1) < 2 or len(p2) < 2:
        return tuple(p1), tuple(p2)
    pairs = lcs_positions(p1, p2)
    if pairs:
        lo1, hi1 = pairs[0][0], pairs[-1][0]
        lo2, hi2 = pairs[0][1], pairs[-1][1]
    else:
        lo1 = hi1 = lo2 = hi2 = -1
    try:
        (cut1,) = max_gap_split(repo, p1, 1, allowed=lambda c: not lo1 < c <= hi1)
        (cut2,) = max_gap_split(repo, p2, 1, allowed=lambda c: not lo2 < c <= hi2)
    except ValueError:
        return tuple(p1), tuple(p2)
    return embed(p1, p2, cut1, cut2)


def mutate_at(repo: Repository, chromosome: Sequence[str], index: int,
              rng: np.random.Generator) -> Chromosome:
    prefix = tuple(chromosome[:index])
    kept = set(prefix)
    rest = [s for s in repo.service_ids if s not in kept]
    order = rng.permutation(len(rest))
    return prefix + tuple(rest[k] for k in order)


def mutate(repo: Repository, chromosome: Sequence[str], rng: np.random.Generator) -> Chromosome:
    """Keep a random-length prefix and append the rest of the repository shuffled."""
    index = int(rng.integers(0, len(chromosome) + 1))
    return mutate_at(repo, chromosome, index, rng)


def evaluate(repo: Repository, task: Task, chromosome: Sequence[str],
             bounds: NormBounds) -> float:
    """Fitness of a chromosome, 1.0 (worst) if it does not decode."""
    try:
        result = backward_decode(repo, task, chromosome)
    except InfeasibleSequence:
        return 1.0
    return fitness(repo, task, result.dag, bounds).fitness


def neighbourhood(repo: Repository, chromosome: Sequence[str], size: int,
                  rng: np.random.Generator) -> list[Chromosome]:
    """Neighbours formed by inserting the suppliers of the far-side service at the widest gap."""
    chromosome = tuple(chromosome)
    if len(chromosome) < 2:
        return []
    (cut,) = max_gap_split(repo, chromosome, 1)
    needs = repo.service(chromosome[cut]).inputs
    present = set(chromosome)
    group = [sid for sid in repo.service_ids
             if sid not in present and repo.provides[sid] & needs]
    if not group:
        return []
    out = []
    for _ in range(size):
        order = rng.permutation(len(group))
        out.append(chromosome[:cut] + tuple(group[k] for k in order) + chromosome[cut:])
    return out


def local_search(repo: Repository, task: Task, chromosome: Sequence[str],
                 neighborhood_size: int, rng: np.random.Generator,
                 bounds: NormBounds | None = None,
                 score: Callable[[Chromosome], float] | None = None) -> Chromosome:
    """Return the best of the chromosome and its neighbours; the original wins ties.

    ``score`` may supply a (cached) fitness function; it defaults to decoding
    and evaluating against ``bounds``.
    """
    chromosome = tuple(chromosome)
    if score is None:
        bounds = bounds or norm_bounds(repo, task)
        score = lambda c: evaluate(repo, task, c, bounds)  # noqa: E731
    neighbours = neighbourhood(repo, chromosome, neighborhood_size, rng)
    if not neighbours:
        return chromosome
    best, best_fit = chromosome, score(chromosome)
    for nb in neighbours:
        f = score(nb)
        if f < best_fit:
            best, best_fit = nb, f
    return best

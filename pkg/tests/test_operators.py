import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dwsc.decode import backward_decode
from dwsc.operators import (
    dedup,
    dg_index_crossover,
    dg_lcs_crossover,
    dg_two_point_crossover,
    embed,
    evaluate,
    index_crossover,
    lcs,
    lcs_positions,
    local_search,
    max_gap_split,
    mutate,
    mutate_at,
    neighbourhood,
)
from dwsc.qos import norm_bounds

from .conftest import make_repo, random_feasible


def geo_repo(points):
    """One service per gene, each on its own server at the given coordinates."""
    coords = {f"L_{g}": xy for g, xy in points.items()}
    services = {g: ({"x"}, {"y"}, f"L_{g}") for g in points}
    return make_repo(services, {"x": None, "y": None}, coords)


def scatter(rng, genes):
    return geo_repo({g: (float(x), float(y)) for g, (x, y) in zip(genes, rng.random((len(genes), 2)))})


def concat_dedup(*parts):
    out, seen = [], set()
    for part in parts:
        for g in part:
            if g not in seen:
                seen.add(g)
                out.append(g)
    return tuple(out)


def is_subsequence(small, big):
    it = iter(big)
    return all(g in it for g in small)


LETTERS = list("abcdefghij")
gene_lists = st.lists(st.sampled_from(LETTERS), min_size=2, max_size=6, unique=True)


# max_gap_split

def test_unique_max_gap():
    repo = geo_repo({"g1": (0, 0), "g2": (0.2, 0), "g3": (0.2, 0.9)})
    assert max_gap_split(repo, ("g1", "g2", "g3"), 1) == [2]


def test_equal_gaps_pick_lowest_index():
    repo = geo_repo({"a": (0, 0), "b": (1, 0), "c": (2, 0), "d": (3, 0)})
    assert max_gap_split(repo, ("a", "b", "c", "d"), 1) == [1]


def test_gap_split_inapplicable():
    repo = geo_repo({"a": (0, 0), "b": (1, 0)})
    with pytest.raises(ValueError):
        max_gap_split(repo, ("a",), 1)
    with pytest.raises(ValueError):
        max_gap_split(repo, ("a", "b"), 2)


def test_two_widest_gaps_match_exhaustive_scan(rng):
    for _ in range(100):
        repo = scatter(rng, LETTERS)
        chrom = tuple(LETTERS[k] for k in rng.permutation(10))
        d = [float(np.hypot(*np.subtract(repo.locations[f"L_{a}"].coords, repo.locations[f"L_{b}"].coords)))
             for a, b in zip(chrom, chrom[1:])]
        best = max(range(9), key=lambda k: (d[k], -k))
        second = max((k for k in range(9) if k != best), key=lambda k: (d[k], -k))
        assert max_gap_split(repo, chrom, 2) == sorted([best + 1, second + 1])
        assert max_gap_split(repo, chrom, 1) == [best + 1]


# index crossover and embedding

def test_index_crossover_forced_example():
    assert embed(("a", "b", "c"), ("d", "e"), 1, 1) == (("a", "d", "e", "b", "c"), ("d", "a", "b", "c", "e"))


def test_embedding_exhaustive_reconstruction():
    pool = list("abcde")
    for n1, n2 in itertools.product(range(2, 6), repeat=2):
        for p1 in itertools.permutations(pool, n1):
            p2 = tuple(reversed(pool))[:n2]
            for c1, c2 in itertools.product(range(1, n1), range(1, n2)):
                got = embed(p1, p2, c1, c2)
                assert got[0] == concat_dedup(p1[:c1], p2, p1[c1:])
                assert got[1] == concat_dedup(p2[:c2], p1, p2[c2:])


@settings(max_examples=200, deadline=None)
@given(gene_lists, gene_lists, st.integers(0, 2**32))
def test_index_crossover_is_one_of_the_embeddings(p1, p2, seed):
    c1, c2 = index_crossover(p1, p2, np.random.default_rng(seed))
    options = {embed(p1, p2, a, b) for a in range(1, len(p1)) for b in range(1, len(p2))}
    assert (c1, c2) in options
    assert set(c1) >= set(p2) and set(c2) >= set(p1)
    assert len(set(c1)) == len(c1)


def test_identical_parents_keep_gene_set(rng):
    p = ("a", "b", "c", "d")
    for child in index_crossover(p, p, rng):
        assert sorted(child) == sorted(p)


def test_degenerate_parent_copied(rng):
    assert index_crossover(("a",), ("b", "c"), rng) == (("a",), ("b", "c"))


# distance-guided crossovers

def test_dg_index_uses_forced_cuts(rng):
    repo = scatter(rng, LETTERS)
    for _ in range(100):
        p1 = tuple(LETTERS[k] for k in rng.choice(10, size=int(rng.integers(2, 8)), replace=False))
        p2 = tuple(LETTERS[k] for k in rng.choice(10, size=int(rng.integers(2, 8)), replace=False))
        (c1,), (c2,) = max_gap_split(repo, p1), max_gap_split(repo, p2)
        assert dg_index_crossover(repo, p1, p2) == embed(p1, p2, c1, c2)


def test_dg_index_colocated_cuts_at_one():
    repo = make_repo({g: ({"x"}, {"y"}, "L0") for g in "abcdef"}, {"x": None, "y": None})
    c1, c2 = dg_index_crossover(repo, ("a", "b", "c"), ("d", "e", "f"))
    assert c1 == ("a", "d", "e", "f", "b", "c")
    assert c2 == ("d", "a", "b", "c", "e", "f")


def test_two_point_forced_interleave():
    repo = geo_repo({g: (float(i), 0.0) for i, g in enumerate("abcdef")})
    c1, c2 = dg_two_point_crossover(repo, ("a", "b", "c"), ("d", "e", "f"))
    assert c1 == ("a", "d", "b", "e", "c", "f")
    assert c2 == ("d", "a", "e", "b", "f", "c")


def test_two_point_union_exhaustive_small(rng):
    pool = list("abcdef")
    repo = scatter(rng, pool)
    for n1, n2 in itertools.product(range(3, 7), repeat=2):
        for _ in range(10):
            p1 = tuple(pool[k] for k in rng.choice(6, size=n1, replace=False))
            p2 = tuple(pool[k] for k in rng.choice(6, size=n2, replace=False))
            i1, i2 = max_gap_split(repo, p1, 2)
            j1, j2 = max_gap_split(repo, p2, 2)
            c1, c2 = dg_two_point_crossover(repo, p1, p2)
            assert set(c1) == set(c2) == set(p1) | set(p2)
            assert c1 == concat_dedup(p1[:i1], p2[:j1], p1[i1:i2], p2[j1:j2], p1[i2:], p2[j2:])
    p = ("a", "b", "c", "d")
    assert set(dg_two_point_crossover(repo, p, p)[0]) == set(p)


def test_two_point_short_parent_falls_back(rng):
    repo = scatter(rng, LETTERS)
    assert dg_two_point_crossover(repo, ("a", "b"), ("c", "d", "e")) == dg_index_crossover(repo, ("a", "b"), ("c", "d", "e"))


# lcs

def lcs_oracle(p1, p2):
    """Exhaustive: longest subsequence of p1 found in p2, lexicographically smallest positions first."""
    for r in range(min(len(p1), len(p2)), -1, -1):
        for pos in itertools.combinations(range(len(p1)), r):
            cand = [p1[i] for i in pos]
            if is_subsequence(cand, p2):
                return cand
    return []


def test_lcs_examples():
    assert lcs(list("abcd"), list("bcde")) == list("bcd")
    assert lcs(list("abc"), list("xyz")) == []


def test_lcs_matches_exponential_oracle(rng):
    for _ in range(200):
        p1 = [LETTERS[k] for k in rng.choice(10, size=int(rng.integers(0, 11)), replace=False)]
        p2 = [LETTERS[k] for k in rng.choice(10, size=int(rng.integers(0, 11)), replace=False)]
        got = lcs(p1, p2)
        assert got == lcs_oracle(p1, p2)
        assert is_subsequence(got, p1) and is_subsequence(got, p2)
        pairs = lcs_positions(p1, p2)
        assert all(p1[i] == p2[j] for i, j in pairs)


# dg-lcs

def test_dg_lcs_skips_cut_inside_common_span():
    repo = geo_repo({"x": (0, 0), "a": (0.1, 0), "b": (5, 0), "y": (7, 0), "z": (7, 3)})
    p1, p2 = ("x", "a", "b", "y"), ("a", "b", "z")
    assert max_gap_split(repo, p1) == [2]
    c1, c2 = dg_lcs_crossover(repo, p1, p2)
    assert c1 == ("x", "a", "b", "z", "y")
    assert c2 == ("a", "b", "x", "y", "z")


def test_dg_lcs_without_common_genes_is_dg_index(rng):
    repo = scatter(rng, LETTERS)
    p1, p2 = tuple("abcd"), tuple("efgh")
    assert dg_lcs_crossover(repo, p1, p2) == dg_index_crossover(repo, p1, p2)


def test_dg_lcs_copies_when_span_covers_parent(rng):
    repo = scatter(rng, LETTERS)
    assert dg_lcs_crossover(repo, ("a", "b"), ("a", "b", "c")) == (("a", "b"), ("a", "b", "c"))


@settings(max_examples=200, deadline=None)
@given(gene_lists, gene_lists, st.integers(0, 1000))
def test_dg_lcs_children_keep_common_subsequence(p1, p2, seed):
    repo = scatter(np.random.default_rng(seed), LETTERS)
    common = lcs(p1, p2)
    c1, c2 = dg_lcs_crossover(repo, p1, p2)
    assert is_subsequence(common, c1) and is_subsequence(common, c2)
    copied = (c1, c2) == (tuple(p1), tuple(p2))
    assert copied or (set(c1) >= set(p2) and set(c2) >= set(p1))


def test_crossovers_are_rng_free_and_deterministic(rng):
    repo = scatter(rng, LETTERS)
    p1, p2 = tuple("jabcde"), tuple("fcgahi")
    for op in (dg_index_crossover, dg_two_point_crossover, dg_lcs_crossover):
        assert op(repo, p1, p2) == op(repo, p1, p2)
    a = index_crossover(p1, p2, np.random.default_rng(3))
    assert a == index_crossover(p1, p2, np.random.default_rng(3))


def test_dedup_keeps_first_occurrence():
    assert dedup(["b", "a", "b", "c", "a"]) == ("b", "a", "c")


# mutation

def test_mutation_boundaries(small_dataset, rng):
    repo = small_dataset.repo
    chrom = tuple(repo.service_ids[:7])
    full = mutate_at(repo, chrom, 0, rng)
    assert sorted(full) == sorted(repo.service_ids)
    kept = mutate_at(repo, chrom, len(chrom), rng)
    assert kept[:7] == chrom
    assert sorted(kept) == sorted(repo.service_ids)


def test_mutation_always_covers_repository(small_dataset, rng):
    repo = small_dataset.repo
    every = set(repo.service_ids)
    for _ in range(1000):
        size = int(rng.integers(1, 15))
        chrom = tuple(repo.service_ids[k] for k in rng.choice(len(every), size=size, replace=False))
        out = mutate(repo, chrom, rng)
        assert set(out) == every and len(out) == len(every)


# local search

def test_local_search_empty_group_returns_input():
    repo = make_repo({"s1": ({"a"}, {"b"}, "L0"), "s2": ({"b"}, {"c"}, "L0")}, {c: None for c in "abc"})
    from dwsc.model import Task
    task = Task(frozenset({"a"}), frozenset({"c"}))
    assert neighbourhood(repo, ("s1", "s2"), 10, np.random.default_rng(0)) == []
    assert local_search(repo, task, ("s1", "s2"), 10, np.random.default_rng(0)) == ("s1", "s2")


def test_local_search_single_neighbour(chain_repo):
    repo, task = chain_repo
    chrom = ("s1", "s2")
    nbs = neighbourhood(repo, chrom, 1, np.random.default_rng(0))
    assert nbs == [("s1", "s4", "s2")]
    b = norm_bounds(repo, task)
    expect = nbs[0] if evaluate(repo, task, nbs[0], b) < evaluate(repo, task, chrom, b) else chrom
    assert local_search(repo, task, chrom, 1, np.random.default_rng(0)) == expect


def test_local_search_returns_minimum_of_evaluated_set(datasets, rng):
    for ds in datasets:
        b = norm_bounds(ds.repo, ds.task)
        for _ in range(20):
            chrom = backward_decode(ds.repo, ds.task, random_feasible(ds, rng)).used_order
            if len(chrom) < 2:
                continue
            seed = int(rng.integers(2**31))
            nbs = neighbourhood(ds.repo, chrom, 10, np.random.default_rng(seed))
            assert len(nbs) in (0, 10)
            out = local_search(ds.repo, ds.task, chrom, 10, np.random.default_rng(seed))
            scores = [evaluate(ds.repo, ds.task, c, b) for c in [chrom] + nbs]
            assert evaluate(ds.repo, ds.task, out, b) == min(scores)
            assert evaluate(ds.repo, ds.task, out, b) <= scores[0]
            if out != chrom:
                assert scores[0] > min(scores)

from __future__ import annotations

import itertools

import numpy as np
import pytest

from dwsc.data import GenSpec, generate
from dwsc.model import (
    Concept,
    DataBinding,
    DataItem,
    LinkAttrs,
    Location,
    Repository,
    Service,
    Task,
    Taxonomy,
    WeightVector,
)


def make_repo(services, concepts, coords=None, tps=0.5, tpd=0.5, ccs=0.5, tsal=0.5,
              data_items=(), weights=None):
    """Small hand-built repository.

    ``services`` maps id -> (inputs, outputs, location[, bindings]); ``concepts``
    maps concept -> parent (or None); ``coords`` maps location -> (x, y).
    Link attributes are constant unless given as callables of (from, to).
    """
    coords = coords or {"L0": (0.0, 0.0)}
    locs = [Location(l, xy, tsal) for l, xy in coords.items()]

    def value(v, a, b):
        return v(a, b) if callable(v) else v

    links = {(a, b): LinkAttrs(value(tps, a, b), value(tpd, a, b), value(ccs, a, b))
             for a in coords for b in coords}
    svc = []
    for sid, spec in services.items():
        ins, outs, loc = spec[:3]
        bindings = spec[3] if len(spec) > 3 else ()
        svc.append(Service(sid, frozenset(ins), frozenset(outs), loc, tuple(bindings)))
    tax = Taxonomy([Concept(c, p) for c, p in concepts.items()])
    return Repository(tax, locs, list(data_items), svc, links, weights or WeightVector())


@pytest.fixture
def chain_repo():
    """a -> s1 -> b -> s2 -> c, with an irrelevant s3 and a more specific producer s4."""
    concepts = {"a": None, "b": None, "b1": "b", "c": None, "z": None}
    services = {
        "s1": ({"a"}, {"b"}, "L0"),
        "s2": ({"b"}, {"c"}, "L1"),
        "s3": ({"z"}, {"c"}, "L0"),
        "s4": ({"a"}, {"b1"}, "L1"),
    }
    repo = make_repo(services, concepts, {"L0": (0.0, 0.0), "L1": (3.0, 4.0)})
    return repo, Task(frozenset({"a"}), frozenset({"c"}))


@pytest.fixture(scope="session")
def small_dataset():
    return generate(GenSpec(n_services=60, n_concepts=60, n_locations=15, n_clusters=4,
                            chain_length=5, seed=3))


@pytest.fixture(scope="session")
def datasets():
    specs = [
        GenSpec(n_services=40, n_concepts=40, n_locations=10, n_clusters=3, chain_length=4, seed=s,
                data_items_per_service=(0, 3))
        for s in range(3)
    ]
    specs += [GenSpec(n_services=120, n_clusters=6, seed=10 + s) for s in range(2)]
    return [generate(s) for s in specs]


def random_feasible(ds, rng, max_extra=None):
    """A random decodable chromosome: planted chain plus random extra services, shuffled."""
    ids = list(ds.repo.service_ids)
    extra = int(rng.integers(0, (max_extra or len(ids)) + 1))
    picks = set(ds.planted) | {ids[k] for k in rng.choice(len(ids), size=min(extra, len(ids)), replace=False)}
    genes = sorted(picks)
    return tuple(genes[k] for k in rng.permutation(len(genes)))


def all_subsets(items):
    items = list(items)
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)

"""Domain types for distributed data-intensive service composition.

All types are immutable after construction. A :class:`Repository` bundles the
concept taxonomy, server locations, hosted data items, services and the
per-location-pair link attributes, and validates them on construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping


class ModelError(ValueError):
    """An invariant of a domain object does not hold."""


class UnknownIdError(KeyError):
    """A concept, location, data item or service id is not known."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown id"


def _unit_interval(value: float, what: str) -> None:
    if not (0.0 < value <= 1.0) or math.isnan(value):
        raise ModelError(f"{what} must lie in (0, 1], got {value!r}")


@dataclass(frozen=True)
class Concept:
    id: str
    parent: str | None = None


@dataclass(frozen=True)
class Location:
    id: str
    coords: tuple[float, float]
    server_access_latency: float

    def __post_init__(self):
        if len(self.coords) != 2 or not all(math.isfinite(c) for c in self.coords):
            raise ModelError(f"location {self.id}: coords must be two finite numbers")
        _unit_interval(self.server_access_latency, f"location {self.id}: server_access_latency")


@dataclass(frozen=True)
class DataItem:
    id: str
    provision_cost: float
    size: float
    location: str

    def __post_init__(self):
        _unit_interval(self.provision_cost, f"data item {self.id}: provision_cost")
        if not self.size > 0:
            raise ModelError(f"data item {self.id}: size must be > 0, got {self.size!r}")


@dataclass(frozen=True)
class DataBinding:
    """How one service uses one data item: per-item processing time, service
    cost, transfer time and communication cost of moving the data in."""

    data: str
    process_time: float
    service_cost: float
    transfer_time: float
    data_comm_cost: float

    def __post_init__(self):
        for name in ("process_time", "service_cost", "transfer_time", "data_comm_cost"):
            _unit_interval(getattr(self, name), f"binding to {self.data}: {name}")


@dataclass(frozen=True)
class Service:
    id: str
    inputs: frozenset[str]
    outputs: frozenset[str]
    location: str
    data_bindings: tuple[DataBinding, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", frozenset(self.inputs))
        object.__setattr__(self, "outputs", frozenset(self.outputs))
        object.__setattr__(self, "data_bindings", tuple(self.data_bindings))


@dataclass(frozen=True)
class Task:
    provided: frozenset[str]
    wanted: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "provided", frozenset(self.provided))
        object.__setattr__(self, "wanted", frozenset(self.wanted))
        if not self.provided or not self.wanted:
            raise ModelError("task provided and wanted concept sets must be non-empty")


@dataclass(frozen=True)
class LinkAttrs:
    prop_delay_service: float
    prop_delay_data: float
    edge_comm_cost: float

    def __post_init__(self):
        for name in ("prop_delay_service", "prop_delay_data", "edge_comm_cost"):
            _unit_interval(getattr(self, name), f"link {name}")


@dataclass(frozen=True)
class WeightVector:
    w_t1: float = 0.2
    w_t2: float = 0.3
    w_c1: float = 0.2
    w_c2: float = 0.3

    def __post_init__(self):
        ws = (self.w_t1, self.w_t2, self.w_c1, self.w_c2)
        if any(w < 0 for w in ws):
            raise ModelError(f"weights must be non-negative, got {ws}")
        if abs(sum(ws) - 1.0) > 1e-12:
            raise ModelError(f"weights must sum to 1, got {sum(ws)!r}")


class Taxonomy:
    """A forest of concepts with precomputed ancestor chains."""

    def __init__(self, concepts: Iterable[Concept]):
        self.concepts: dict[str, Concept] = {}
        for c in concepts:
            if c.id in self.concepts:
                raise ModelError(f"duplicate concept {c.id}")
            self.concepts[c.id] = c
        for c in self.concepts.values():
            if c.parent is not None and c.parent not in self.concepts:
                raise ModelError(f"concept {c.id}: parent {c.parent} does not exist")
        self._ancestors: dict[str, frozenset[str]] = {}
        for cid in self.concepts:
            self._ancestors[cid] = self._chain(cid)

    def _chain(self, cid: str) -> frozenset[str]:
        seen = [cid]
        parent = self.concepts[cid].parent
        while parent is not None:
            if parent in seen:
                raise ModelError(f"taxonomy cycle through concept {parent}")
            seen.append(parent)
            parent = self.concepts[parent].parent
        return frozenset(seen)

    def __contains__(self, cid: str) -> bool:
        return cid in self.concepts

    def __len__(self) -> int:
        return len(self.concepts)

    def ancestors(self, cid: str) -> frozenset[str]:
        """The concept itself plus every concept above it."""
        try:
            return self._ancestors[cid]
        except KeyError:
            raise UnknownIdError(f"unknown concept {cid!r}") from None

    def closure(self, concepts: Iterable[str]) -> frozenset[str]:
        """Every concept that some member of ``concepts`` can satisfy."""
        out: set[str] = set()
        for c in concepts:
            out |= self.ancestors(c)
        return frozenset(out)

    def subsumes(self, provided: str, required: str) -> bool:
        if required not in self.concepts:
            raise UnknownIdError(f"unknown concept {required!r}")
        return required in self.ancestors(provided)

    def satisfies(self, available: Iterable[str], needed: Iterable[str]) -> bool:
        needed = list(needed)
        for c in needed:
            if c not in self.concepts:
                raise UnknownIdError(f"unknown concept {c!r}")
        return set(needed) <= self.closure(available)


def subsumes(taxonomy: Taxonomy, provided: str, required: str) -> bool:
    """True iff ``provided`` equals ``required`` or descends from it."""
    return taxonomy.subsumes(provided, required)


def satisfies(taxonomy: Taxonomy, available: Iterable[str], needed: Iterable[str]) -> bool:
    """True iff every needed concept is subsumed by some available concept."""
    return taxonomy.satisfies(available, needed)


@dataclass(frozen=True, eq=False)
class Repository:
    """A service repository with everything the QoS model needs.

    ``distances`` optionally overrides coordinate-based Euclidean distances
    with an externally supplied pairwise matrix keyed by location pair.
    """

    taxonomy: Taxonomy
    locations: Mapping[str, Location]
    data_items: Mapping[str, DataItem]
    services: Mapping[str, Service]
    link_attrs: Mapping[tuple[str, str], LinkAttrs]
    weights: WeightVector = field(default_factory=WeightVector)
    distances: Mapping[tuple[str, str], float] | None = None

    def __post_init__(self):
        for name in ("locations", "data_items", "services"):
            value = getattr(self, name)
            if not isinstance(value, Mapping):
                value = {item.id: item for item in value}
                if len(value) != len(getattr(self, name)):
                    raise ModelError(f"duplicate ids in {name}")
                object.__setattr__(self, name, value)
        self._check()

    def _check(self):
        for d in self.data_items.values():
            if d.location not in self.locations:
                raise ModelError(f"data item {d.id}: unknown location {d.location}")
        for s in self.services.values():
            if not s.inputs or not s.outputs:
                raise ModelError(f"service {s.id}: inputs and outputs must be non-empty")
            for c in s.inputs | s.outputs:
                if c not in self.taxonomy:
                    raise ModelError(f"service {s.id}: unknown concept {c}")
            if s.location not in self.locations:
                raise ModelError(f"service {s.id}: unknown location {s.location}")
            for b in s.data_bindings:
                if b.data not in self.data_items:
                    raise ModelError(f"service {s.id}: unknown data item {b.data}")
        for a in self.locations:
            for b in self.locations:
                if (a, b) not in self.link_attrs:
                    raise ModelError(f"link attributes missing for location pair ({a}, {b})")
        if self.distances is not None:
            for a in self.locations:
                for b in self.locations:
                    d = self.distances.get((a, b))
                    if d is None or not d >= 0 or not math.isfinite(d):
                        raise ModelError(f"distance for ({a}, {b}) missing or invalid")

    def check_task(self, task: Task) -> None:
        for c in task.provided | task.wanted:
            if c not in self.taxonomy:
                raise ModelError(f"task: unknown concept {c}")

    def service(self, sid: str) -> Service:
        try:
            return self.services[sid]
        except KeyError:
            raise UnknownIdError(f"unknown service {sid!r}") from None

    def link(self, src_location: str, dst_location: str) -> LinkAttrs:
        return self.link_attrs[(src_location, dst_location)]

    @cached_property
    def service_ids(self) -> tuple[str, ...]:
        return tuple(self.services)

    @cached_property
    def provides(self) -> dict[str, frozenset[str]]:
        """Per service, every input concept its outputs can satisfy."""
        return {sid: self.taxonomy.closure(s.outputs) for sid, s in self.services.items()}

    @cached_property
    def max_prop_delay_service(self) -> float:
        return max(la.prop_delay_service for la in self.link_attrs.values())

    @cached_property
    def max_edge_comm_cost(self) -> float:
        return max(la.edge_comm_cost for la in self.link_attrs.values())

    def location_distance(self, a: str, b: str) -> float:
        if self.distances is not None:
            return self.distances[(a, b)]
        (x1, y1), (x2, y2) = self.locations[a].coords, self.locations[b].coords
        return math.hypot(x1 - x2, y1 - y2)

    @cached_property
    def _distance_cache(self) -> dict[tuple[str, str], float]:
        return {}

    def service_distance(self, s1: str, s2: str) -> float:
        key = (s1, s2)
        cache = self._distance_cache
        d = cache.get(key)
        if d is None:
            d = self.location_distance(self.service(s1).location, self.service(s2).location)
            cache[key] = cache[(s2, s1)] = d
        return d


def service_distance(repo: Repository, s1: str, s2: str) -> float:
    """Distance between the servers hosting two services."""
    return repo.service_distance(s1, s2)

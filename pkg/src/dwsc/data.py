"""Dataset files, the synthetic repository generator and distance handling.

Datasets are stored as canonical JSON: fixed key order, floats written with
17 significant digits, so equal repositories produce identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .model import (
    Concept,
    DataBinding,
    DataItem,
    LinkAttrs,
    Location,
    ModelError,
    Repository,
    Service,
    Task,
    Taxonomy,
    WeightVector,
)

SCHEMA_VERSION = 1
# propagation delay floor for co-located servers, keeps link values in (0, 1]
MIN_DELAY = 1e-6


class DatasetError(ValueError):
    pass


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    repo: Repository
    task: Task
    # generator-planted solution chain in execution order; not serialised
    planted: tuple[str, ...] = field(default=(), compare=False)


# ---------------------------------------------------------------------------
# canonical text form


def _emit(value: Any, out: list[str], indent: int) -> None:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        items = list(value.items())
        for k, (key, v) in enumerate(items):
            out.append(f"{pad}  {json.dumps(key)}: ")
            _emit(v, out, indent + 1)
            out.append(",\n" if k < len(items) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        if not value:
            out.append("[]")
        elif all(not isinstance(v, (dict, list, tuple)) for v in value):
            out.append("[")
            for k, v in enumerate(value):
                if k:
                    out.append(", ")
                _emit(v, out, indent)
            out.append("]")
        else:
            out.append("[\n")
            for k, v in enumerate(value):
                out.append(pad + "  ")
                _emit(v, out, indent + 1)
                out.append(",\n" if k < len(value) - 1 else "\n")
            out.append(pad + "]")
    elif isinstance(value, bool) or value is None:
        out.append(json.dumps(value))
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise DatasetError(f"cannot serialise non-finite number {value!r}")
        text = format(value, ".17g")
        if not any(ch in text for ch in ".e"):
            text += ".0"
        out.append(text)
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    else:
        raise DatasetError(f"cannot serialise {type(value).__name__}")


def canonical_dumps(document: dict) -> str:
    out: list[str] = []
    _emit(document, out, 0)
    return "".join(out) + "\n"


def to_document(repo: Repository, task: Task) -> dict:
    loc_ids = list(repo.locations)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "weights": {
            "w_t1": repo.weights.w_t1,
            "w_t2": repo.weights.w_t2,
            "w_c1": repo.weights.w_c1,
            "w_c2": repo.weights.w_c2,
        },
        "task": {"provided": sorted(task.provided), "wanted": sorted(task.wanted)},
        "taxonomy": [
            {"id": c.id, "parent": c.parent} for c in repo.taxonomy.concepts.values()
        ],
        "locations": [
            {"id": l.id, "coords": [float(l.coords[0]), float(l.coords[1])],
             "server_access_latency": l.server_access_latency}
            for l in repo.locations.values()
        ],
        "data_items": [
            {"id": d.id, "provision_cost": d.provision_cost, "size": d.size, "location": d.location}
            for d in repo.data_items.values()
        ],
        "services": [
            {
                "id": s.id,
                "inputs": sorted(s.inputs),
                "outputs": sorted(s.outputs),
                "location": s.location,
                "data_bindings": [
                    {
                        "data": b.data,
                        "process_time": b.process_time,
                        "service_cost": b.service_cost,
                        "transfer_time": b.transfer_time,
                        "data_comm_cost": b.data_comm_cost,
                    }
                    for b in s.data_bindings
                ],
            }
            for s in repo.services.values()
        ],
        "link_attrs": [
            {
                "from": a,
                "to": b,
                "prop_delay_service": repo.link_attrs[(a, b)].prop_delay_service,
                "prop_delay_data": repo.link_attrs[(a, b)].prop_delay_data,
                "edge_comm_cost": repo.link_attrs[(a, b)].edge_comm_cost,
            }
            for a in loc_ids
            for b in loc_ids
        ],
        "distances": None
        if repo.distances is None
        else [[repo.distances[(a, b)] for b in loc_ids] for a in loc_ids],
    }
    return doc


def _field(record: dict, name: str, where: str):
    try:
        return record[name]
    except (KeyError, TypeError):
        raise DatasetError(f"{where}: missing field {name!r}") from None


def _number(record: dict, name: str, where: str) -> float:
    v = _field(record, name, where)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DatasetError(f"{where}: field {name!r} must be a number")
    return float(v)


def _strings(record: dict, name: str, where: str) -> list[str]:
    v = _field(record, name, where)
    if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
        raise DatasetError(f"{where}: field {name!r} must be a list of strings")
    return v


def from_document(doc: dict) -> Dataset:
    if not isinstance(doc, dict):
        raise DatasetError("dataset: top level must be an object")
    version = _field(doc, "schema_version", "dataset")
    if version != SCHEMA_VERSION:
        raise DatasetError(f"dataset: unsupported schema_version {version!r}")
    where = None
    try:
        where = "weights"
        w = _field(doc, "weights", "dataset")
        weights = WeightVector(*(_number(w, k, where) for k in ("w_t1", "w_t2", "w_c1", "w_c2")))
        where = "taxonomy"
        concepts = [
            Concept(_field(c, "id", f"taxonomy[{k}]"), _field(c, "parent", f"taxonomy[{k}]"))
            for k, c in enumerate(_field(doc, "taxonomy", "dataset"))
        ]
        taxonomy = Taxonomy(concepts)
        locations = []
        for k, l in enumerate(_field(doc, "locations", "dataset")):
            where = f"locations[{k}]"
            coords = _field(l, "coords", where)
            if not isinstance(coords, list) or len(coords) != 2:
                raise DatasetError(f"{where}: coords must be a pair")
            locations.append(Location(_field(l, "id", where), (float(coords[0]), float(coords[1])),
                                      _number(l, "server_access_latency", where)))
        data_items = []
        for k, d in enumerate(_field(doc, "data_items", "dataset")):
            where = f"data_items[{k}]"
            data_items.append(DataItem(_field(d, "id", where), _number(d, "provision_cost", where),
                                       _number(d, "size", where), _field(d, "location", where)))
        services = []
        for k, s in enumerate(_field(doc, "services", "dataset")):
            where = f"services[{k}]"
            bindings = []
            for j, b in enumerate(_field(s, "data_bindings", where)):
                bw = f"{where}.data_bindings[{j}]"
                bindings.append(DataBinding(
                    _field(b, "data", bw),
                    _number(b, "process_time", bw),
                    _number(b, "service_cost", bw),
                    _number(b, "transfer_time", bw),
                    _number(b, "data_comm_cost", bw),
                ))
            services.append(Service(_field(s, "id", where), frozenset(_strings(s, "inputs", where)),
                                    frozenset(_strings(s, "outputs", where)),
                                    _field(s, "location", where), tuple(bindings)))
        links = {}
        for k, la in enumerate(_field(doc, "link_attrs", "dataset")):
            where = f"link_attrs[{k}]"
            key = (_field(la, "from", where), _field(la, "to", where))
            links[key] = LinkAttrs(_number(la, "prop_delay_service", where),
                                   _number(la, "prop_delay_data", where),
                                   _number(la, "edge_comm_cost", where))
        where = "distances"
        distances = None
        raw = doc.get("distances")
        if raw is not None:
            ids = [l.id for l in locations]
            if len(raw) != len(ids) or any(len(row) != len(ids) for row in raw):
                raise DatasetError("distances: matrix shape does not match locations")
            distances = {(a, b): float(raw[i][j]) for i, a in enumerate(ids) for j, b in enumerate(ids)}
        where = "repository"
        repo = Repository(taxonomy, locations, data_items, services, links, weights, distances)
        where = "task"
        t = _field(doc, "task", "dataset")
        task = Task(frozenset(_strings(t, "provided", where)), frozenset(_strings(t, "wanted", where)))
        repo.check_task(task)
    except ModelError as exc:
        raise DatasetError(f"{where}: {exc}") from exc
    except (TypeError, AttributeError) as exc:
        raise DatasetError(f"{where}: malformed record ({exc})") from exc
    return Dataset(repo, task)


def dumps(repo: Repository, task: Task) -> str:
    return canonical_dumps(to_document(repo, task))


def loads(text: str) -> Dataset:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"dataset: not valid JSON ({exc})") from exc
    return from_document(doc)


def save(repo: Repository, task: Task, path) -> str:
    text = dumps(repo, task)
    Path(path).write_text(text, encoding="utf-8")
    return text


def load(path) -> Dataset:
    return loads(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# distances and link attributes


def distance_matrix(repo: Repository) -> np.ndarray:
    """Pairwise distances between locations, in location order."""
    ids = list(repo.locations)
    return np.array([[repo.location_distance(a, b) for b in ids] for a in ids], dtype=float)


def coords_distance_matrix(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def propagation_delays(distances: np.ndarray) -> np.ndarray:
    """Distance over a propagation constant picked so the farthest pair maps to 1."""
    peak = float(distances.max()) if distances.size else 0.0
    scaled = distances / peak if peak > 0 else np.zeros_like(distances)
    return np.clip(scaled, MIN_DELAY, 1.0)


def load_distance_matrix(path) -> np.ndarray:
    """Read a square whitespace- or comma-separated distance matrix."""
    text = Path(path).read_text(encoding="utf-8").replace(",", " ")
    rows = [list(map(float, line.split())) for line in text.splitlines() if line.strip()]
    m = np.array(rows, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DatasetError(f"{path}: distance matrix must be square")
    if (m < 0).any() or not np.isfinite(m).all():
        raise DatasetError(f"{path}: distances must be finite and non-negative")
    return m


# ---------------------------------------------------------------------------
# generator


@dataclass(frozen=True)
class GenSpec:
    n_services: int = 200
    n_concepts: int = 150
    n_locations: int = 60
    n_clusters: int = 10
    data_items_per_service: tuple[int, int] = (1, 1)
    chain_length: int = 10
    seed: int = 0
    n_data_items: int | None = None
    # share of non-chain services that are functional variants of chain steps
    variant_share: float = 0.6
    # share of variants that jump one stage ahead
    skip_share: float = 0.05
    cluster_spread: float = 0.05

    def __post_init__(self):
        counts = (self.n_services, self.n_concepts, self.n_locations, self.n_clusters, self.chain_length)
        if min(counts) < 1:
            raise GenerationError("all counts must be >= 1")
        lo, hi = self.data_items_per_service
        if not 0 <= lo <= hi:
            raise GenerationError("data_items_per_service must be an ordered non-negative range")
        if self.chain_length > self.n_services:
            raise GenerationError("chain_length cannot exceed n_services")
        if self.n_concepts < self.chain_length + 3:
            raise GenerationError("n_concepts must be at least chain_length + 3")
        if not 0.0 <= self.variant_share <= 1.0:
            raise GenerationError("variant_share must be in [0, 1]")


def _unit(rng: np.random.Generator, size=None):
    # uniform on (0, 1]
    return 1.0 - rng.random(size)


def _ancestors(parents: list[int | None], c: int) -> list[int]:
    out = [c]
    while parents[c] is not None:
        c = parents[c]
        out.append(c)
    return out


def _descendants(parents: list[int | None]) -> list[list[int]]:
    children: list[list[int]] = [[] for _ in parents]
    for c, p in enumerate(parents):
        if p is not None:
            children[p].append(c)
    return children


def generate(spec: GenSpec, distances: np.ndarray | None = None) -> Dataset:
    """Build a random repository with a planted feasible service chain.

    ``distances`` optionally supplies an external location distance matrix;
    its size then fixes the number of locations.
    """
    rng = np.random.default_rng(spec.seed)
    n_loc = spec.n_locations if distances is None else distances.shape[0]

    # taxonomy: a few roots, every other concept hangs below an earlier one
    n_roots = max(1, spec.n_concepts // 20)
    parents: list[int | None] = [None] * n_roots
    for c in range(n_roots, spec.n_concepts):
        parents.append(int(rng.integers(0, c)))
    children = _descendants(parents)
    cname = [f"c{c:04d}" for c in range(spec.n_concepts)]
    concepts = [Concept(cname[c], None if p is None else cname[p]) for c, p in enumerate(parents)]

    def specialise(c: int) -> int:
        """Walk down a random number of levels (outputs may be more specific)."""
        while children[c] and rng.random() < 0.5:
            c = int(children[c][rng.integers(0, len(children[c]))])
        return c

    # locations in Gaussian clusters on the unit square
    centres = rng.random((spec.n_clusters, 2))
    member = rng.integers(0, spec.n_clusters, size=n_loc)
    coords = np.clip(centres[member] + rng.normal(0.0, spec.cluster_spread, size=(n_loc, 2)), 0.0, 1.0)
    tsal = _unit(rng, n_loc)
    lname = [f"l{k:04d}" for k in range(n_loc)]
    locations = [Location(lname[k], (float(coords[k, 0]), float(coords[k, 1])), float(tsal[k]))
                 for k in range(n_loc)]

    dist = coords_distance_matrix(coords) if distances is None else np.asarray(distances, dtype=float)
    delay = propagation_delays(dist)
    ccs = _unit(rng, (n_loc, n_loc))
    link_attrs = {
        (lname[a], lname[b]): LinkAttrs(float(delay[a, b]), float(delay[a, b]), float(ccs[a, b]))
        for a in range(n_loc) for b in range(n_loc)
    }

    n_data = spec.n_data_items or max(1, spec.n_services // 2)
    dname = [f"d{k:04d}" for k in range(n_data)]
    data_items = [
        DataItem(dname[k], float(_unit(rng)), float(_unit(rng)), lname[int(rng.integers(0, n_loc))])
        for k in range(n_data)
    ]

    # planted chain: provided -> k1 -> ... -> k_{L-1} -> wanted
    L = spec.chain_length
    order = [int(c) for c in rng.permutation(spec.n_concepts)]
    provided = order[:2]
    reachable = {c for p in provided for c in _ancestors(parents, p)}
    rest = [c for c in order[2:] if c not in reachable]
    if len(rest) < L + 1:
        raise GenerationError("taxonomy too shallow to place a planted chain")
    wanted = rest[:2] if len(rest) >= L + 2 else rest[:1]
    inner = rest[len(wanted):len(wanted) + L - 1]
    stage_in = [provided] + [[k] for k in inner]
    stage_out = [[k] for k in inner] + [wanted]

    def bindings() -> tuple[DataBinding, ...]:
        lo, hi = spec.data_items_per_service
        m = int(rng.integers(lo, hi + 1))
        picks = rng.choice(n_data, size=min(m, n_data), replace=False)
        return tuple(
            DataBinding(dname[int(d)], float(_unit(rng)), float(_unit(rng)), float(_unit(rng)), float(_unit(rng)))
            for d in sorted(picks)
        )

    def place() -> str:
        return lname[int(rng.integers(0, n_loc))]

    signatures: list[tuple[list[int], list[int]]] = []
    for i in range(L):
        signatures.append((stage_in[i], stage_out[i]))
    useful = provided + inner
    # distractor outputs never satisfy a chain or task concept
    chain_concepts = set(inner) | set(wanted)
    free = [c for c in range(spec.n_concepts)
            if not chain_concepts.intersection(_ancestors(parents, c))]
    for _ in range(spec.n_services - L):
        if rng.random() < spec.variant_share or not free:
            # functional variant of a chain stage; a few skip one stage ahead
            i = int(rng.integers(0, L))
            j = min(L - 1, i + 1) if rng.random() < spec.skip_share else i
            outs = [specialise(c) for c in stage_out[j]]
            if len(outs) > 1 and rng.random() < 0.5:
                outs = [outs[int(rng.integers(0, len(outs)))]]
            signatures.append((list(stage_in[i]), outs))
        else:
            n_in = int(rng.integers(1, 3))
            n_out = int(rng.integers(1, 4))
            ins = [useful[int(rng.integers(0, len(useful)))] if rng.random() < 0.5
                   else int(rng.integers(0, spec.n_concepts)) for _ in range(n_in)]
            outs = [free[int(rng.integers(0, len(free)))] for _ in range(n_out)]
            signatures.append((ins, outs))

    # shuffle so the planted chain is not at fixed ids
    perm = rng.permutation(len(signatures))
    services = []
    for k, idx in enumerate(perm):
        ins, outs = signatures[int(idx)]
        services.append(Service(f"s{k:04d}", frozenset(cname[c] for c in ins),
                                frozenset(cname[c] for c in outs), place(), bindings()))

    planted = tuple(f"s{k:04d}" for k in sorted(range(len(perm)), key=lambda k: perm[k]) if perm[k] < L)

    dist_map = None
    if distances is not None:
        dist_map = {(lname[a], lname[b]): float(dist[a, b]) for a in range(n_loc) for b in range(n_loc)}
    repo = Repository(Taxonomy(concepts), locations, data_items, services, link_attrs,
                      WeightVector(), dist_map)
    task = Task(frozenset(cname[c] for c in provided), frozenset(cname[c] for c in wanted))
    return Dataset(repo, task, planted)

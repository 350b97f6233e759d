"""Location- and data-aware QoS of compositions.

Per-service time and cost sum over the data items a service consumes.
Composition cost adds weighted node costs and inter-service communication
costs; composition time is the heaviest weighted START->END path. Both are
normalised against repository-wide upper bounds and combined into a single
fitness in [0, 1] (lower is better).
"""

from __future__ import annotations

import sys
import weakref
from dataclasses import dataclass

from .decode import END, START, CompositionDag
from .model import ModelError, Repository, Task


@dataclass(frozen=True)
class NormBounds:
    time_ub: float
    cost_ub: float


@dataclass(frozen=True)
class QosBreakdown:
    total_time: float
    total_cost: float
    norm_time: float
    norm_cost: float
    fitness: float


def service_time(repo: Repository, service: str) -> float:
    s = repo.service(service)
    total = 0.0
    for b in s.data_bindings:
        try:
            d = repo.data_items[b.data]
        except KeyError:
            raise ModelError(f"service {service}: missing data item {b.data}") from None
        tpd = repo.link(d.location, s.location).prop_delay_data
        tsal = repo.locations[d.location].server_access_latency
        total += tpd + tsal + b.process_time + b.transfer_time
    return total


def service_cost(repo: Repository, service: str) -> float:
    s = repo.service(service)
    total = 0.0
    for b in s.data_bindings:
        try:
            d = repo.data_items[b.data]
        except KeyError:
            raise ModelError(f"service {service}: missing data item {b.data}") from None
        total += b.data_comm_cost + d.provision_cost + b.service_cost
    return total


_TABLES: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _service_table(repo: Repository) -> dict[str, tuple[float, float]]:
    table = _TABLES.get(repo)
    if table is None:
        table = {sid: (service_time(repo, sid), service_cost(repo, sid)) for sid in repo.services}
        _TABLES[repo] = table
    return table


def _is_virtual(node: str) -> bool:
    return node == START or node == END


def _edge_link(repo: Repository, source: str, target: str):
    if _is_virtual(source) or _is_virtual(target):
        return None
    services = repo.services
    return repo.link(services[source].location, services[target].location)


def total_cost(repo: Repository, dag: CompositionDag) -> float:
    table = _service_table(repo)
    node_sum = sum(table[n][1] for n in dag.nodes if not _is_virtual(n))
    edge_sum = 0.0
    for e in dag.edges:
        link = _edge_link(repo, e.source, e.target)
        if link is not None:
            edge_sum += link.edge_comm_cost
    w = repo.weights
    return w.w_c1 * node_sum + w.w_c2 * edge_sum


def total_time(repo: Repository, dag: CompositionDag) -> float:
    """Weight of the heaviest START->END path, by longest-path DP."""
    table = _service_table(repo)
    w = repo.weights
    order = dag.topological_order()
    incoming = dag.incoming()
    best: dict[str, float] = {}
    for n in order:
        node_w = 0.0 if _is_virtual(n) else w.w_t1 * table[n][0]
        preds = incoming.get(n, [])
        if n == START:
            best[n] = 0.0
            continue
        reach = [
            best[e.source] + (0.0 if (link := _edge_link(repo, e.source, n)) is None
                              else w.w_t2 * link.prop_delay_service)
            for e in preds
            if e.source in best
        ]
        if reach:
            best[n] = max(reach) + node_w
    return best.get(END, 0.0)


def norm_bounds(repo: Repository, task: Task | None = None) -> NormBounds:
    """Upper bounds no composition over the repository can exceed."""
    if not repo.services:
        raise ModelError("repository has no services")
    table = _service_table(repo)
    n = len(repo.services)
    w = repo.weights
    time_ub = w.w_t1 * sum(t for t, _ in table.values()) + w.w_t2 * n * repo.max_prop_delay_service
    cost_ub = w.w_c1 * sum(c for _, c in table.values()) + w.w_c2 * n * n * repo.max_edge_comm_cost
    floor = sys.float_info.min
    return NormBounds(max(time_ub, floor), max(cost_ub, floor))


def fitness(repo: Repository, task: Task, dag: CompositionDag, bounds: NormBounds) -> QosBreakdown:
    t = total_time(repo, dag)
    c = total_cost(repo, dag)
    nt = min(1.0, t / bounds.time_ub)
    nc = min(1.0, c / bounds.cost_ub)
    # weights already live inside the aggregates; the clamp only guards saturation
    return QosBreakdown(t, c, nt, nc, min(1.0, nt + nc))

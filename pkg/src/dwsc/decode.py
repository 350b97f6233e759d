"""Backward decoding of service sequences into composition DAGs.

A chromosome is a duplicate-free tuple of service ids. Decoding works from
the END node backwards: the sequence is scanned from its last gene to its
first, repeatedly, and a gene is taken into the composition when its outputs
cover a still-open input of a node already in it. Scanning stops once a full
pass changes nothing.

Two rules keep the result feasible whenever the gene set can be:

* only genes that are executable from the task inputs using the gene set
  alone may be admitted, and
* a producer may only feed a consumer of a strictly higher forward layer
  (layer = step at which forward chaining first makes the service runnable).

Every uncovered input then has some eligible producer, so decoding succeeds
exactly when the task outputs are reachable from the gene set, which makes
success monotone under gene-set supersets. The decode is repeated on its own
used services until the used order no longer changes, so decoding a reduced
chromosome gives back the same composition.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import Repository, Task

START = "START"
END = "END"

Chromosome = tuple[str, ...]


class InfeasibleSequence(Exception):
    """The genes plus the task inputs cannot produce everything needed."""

    def __init__(self, uncovered: Iterable[str]):
        self.uncovered = frozenset(uncovered)
        super().__init__(f"sequence cannot cover concepts: {sorted(self.uncovered)}")


class CycleError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    concepts: frozenset[str]


@dataclass(frozen=True)
class CompositionDag:
    nodes: frozenset[str]
    edges: tuple[Edge, ...]

    @property
    def services(self) -> frozenset[str]:
        return self.nodes - {START, END}

    def incoming(self) -> dict[str, list[Edge]]:
        out: dict[str, list[Edge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            out.setdefault(e.target, []).append(e)
        return out

    def outgoing(self) -> dict[str, list[Edge]]:
        out: dict[str, list[Edge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            out.setdefault(e.source, []).append(e)
        return out

    def topological_order(self) -> list[str]:
        """Kahn's algorithm with sorted tie-breaking; raises CycleError."""
        indeg = {n: 0 for n in self.nodes}
        succ: dict[str, list[str]] = defaultdict(list)
        for e in self.edges:
            indeg[e.target] += 1
            succ[e.source].append(e.target)
        ready = sorted(n for n, d in indeg.items() if d == 0)
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for m in succ[n]:
                indeg[m] -= 1
                if indeg[m] == 0:
                    ready.append(m)
            ready.sort()
        if len(order) != len(self.nodes):
            raise CycleError("composition graph contains a cycle")
        return order


@dataclass(frozen=True)
class DecodeResult:
    dag: CompositionDag
    used_order: Chromosome


def _forward_layers(repo: Repository, available: frozenset[str], genes: Sequence[str]):
    """Layer index of every gene runnable from ``available`` using ``genes``."""
    avail = set(available)
    layer: dict[str, int] = {}
    remaining = list(genes)
    services = repo.services
    provides = repo.provides
    level = 1
    while remaining:
        ready = [g for g in remaining if services[g].inputs <= avail]
        if not ready:
            break
        for g in ready:
            layer[g] = level
            avail |= provides[g]
        remaining = [g for g in remaining if g not in layer]
        level += 1
    return layer, avail


def _decode_once(repo: Repository, task: Task, genes: Sequence[str], start_cover: frozenset[str]):
    layer, avail = _forward_layers(repo, start_cover, genes)
    missing = task.wanted - avail
    if missing:
        raise InfeasibleSequence(missing)

    services = repo.services
    provides = repo.provides
    edges: dict[tuple[str, str], set[str]] = defaultdict(set)
    # open[node] = inputs of an admitted node not yet fed by any producer
    open_inputs: dict[str, set[str]] = {}
    node_layer: dict[str, float] = {END: float("inf")}

    def admit(node: str, needs: frozenset[str]):
        from_start = needs & start_cover
        if from_start:
            edges[(START, node)].update(from_start)
        rest = set(needs - from_start)
        if rest:
            open_inputs[node] = rest

    admit(END, task.wanted)
    admitted: set[str] = set()
    scan = [g for g in reversed(genes) if g in layer]
    changed = bool(open_inputs)
    while changed:
        changed = False
        for g in scan:
            if not open_inputs:
                break
            lg = layer[g]
            covers = provides[g]
            hits = []
            for node, need in open_inputs.items():
                if node_layer[node] > lg:
                    got = need & covers
                    if got:
                        hits.append((node, got))
            if not hits:
                continue
            for node, got in hits:
                edges[(g, node)].update(got)
                need = open_inputs[node]
                need -= got
                if not need:
                    del open_inputs[node]
            if g not in admitted:
                admitted.add(g)
                node_layer[g] = lg
                admit(g, services[g].inputs)
            changed = True

    if open_inputs:
        raise InfeasibleSequence(set().union(*open_inputs.values()))

    position = {g: i for i, g in enumerate(genes)}
    used = tuple(sorted(admitted, key=lambda g: (layer[g], position[g])))
    dag = CompositionDag(
        nodes=frozenset(admitted | {START, END}),
        edges=tuple(Edge(s, t, frozenset(c)) for (s, t), c in sorted(edges.items())),
    )
    return DecodeResult(dag, used)


def backward_decode(repo: Repository, task: Task, chromosome: Sequence[str]) -> DecodeResult:
    """Decode a service sequence into a feasible composition.

    Raises :class:`InfeasibleSequence` listing the concepts that the genes and
    task inputs cannot produce.
    """
    genes = tuple(dict.fromkeys(chromosome))
    for g in genes:
        repo.service(g)
    start_cover = repo.taxonomy.closure(task.provided)
    if task.wanted <= start_cover:
        dag = CompositionDag(frozenset({START, END}), (Edge(START, END, task.wanted),))
        return DecodeResult(dag, ())
    result = _decode_once(repo, task, genes, start_cover)
    # re-decode the used genes until the used order is stable
    while result.used_order != genes:
        genes = result.used_order
        result = _decode_once(repo, task, genes, start_cover)
    return result


def reduce(chromosome: Sequence[str], decode_result: DecodeResult) -> Chromosome:
    """Keep only the services the decoded composition uses."""
    return tuple(decode_result.used_order)


def validate(repo: Repository, task: Task, dag: CompositionDag) -> tuple[bool, list[str]]:
    """Check every feasibility condition of a composition DAG.

    Returns ``(ok, violations)``; each violation is a readable message naming
    the offending node or edge and the concepts involved.
    """
    tax = repo.taxonomy
    violations: list[str] = []
    if START not in dag.nodes or END not in dag.nodes:
        violations.append("graph lacks START or END node")
        return False, violations

    def inputs_of(node):
        if node == END:
            return task.wanted
        if node == START:
            return frozenset()
        return repo.services[node].inputs

    def outputs_of(node):
        if node == START:
            return task.provided
        if node == END:
            return frozenset()
        return repo.services[node].outputs

    for n in dag.services:
        if n not in repo.services:
            violations.append(f"node {n}: unknown service")
    if violations:
        return False, violations

    for e in dag.edges:
        tag = f"edge {e.source}->{e.target}"
        if e.source not in dag.nodes or e.target not in dag.nodes:
            violations.append(f"{tag}: endpoint not in graph")
            continue
        if e.target == START or e.source == END:
            violations.append(f"{tag}: wrong direction at START/END")
            continue
        produced = tax.closure(outputs_of(e.source))
        unproduced = e.concepts - produced
        if unproduced:
            violations.append(f"{tag}: concepts not produced by source: {sorted(unproduced)}")
        unwanted = e.concepts - inputs_of(e.target)
        if unwanted:
            violations.append(f"{tag}: concepts are not inputs of target: {sorted(unwanted)}")

    try:
        dag.topological_order()
    except CycleError:
        violations.append("graph contains a cycle")

    incoming = dag.incoming()
    for n in sorted(dag.nodes - {START}):
        fed = set().union(*(e.concepts for e in incoming.get(n, [])))
        missing = inputs_of(n) - fed
        if missing:
            violations.append(f"node {n}: inputs not covered: {sorted(missing)}")

    succ = defaultdict(set)
    pred = defaultdict(set)
    for e in dag.edges:
        succ[e.source].add(e.target)
        pred[e.target].add(e.source)
    from_start = _reach(START, succ)
    to_end = _reach(END, pred)
    for n in sorted(dag.nodes):
        if n not in from_start or n not in to_end:
            violations.append(f"node {n}: not on any START->END path")
    return not violations, violations


def _reach(origin, adjacency):
    seen = {origin}
    stack = [origin]
    while stack:
        n = stack.pop()
        for m in adjacency[n]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return seen


def export_dag(dag: CompositionDag) -> str:
    """Plain-text node and edge listing of a composition."""
    lines = ["nodes:"]
    order = dag.topological_order()
    lines += [f"  {n}" for n in order]
    lines.append("edges:")
    for e in dag.edges:
        lines.append(f"  {e.source} -> {e.target} [{', '.join(sorted(e.concepts))}]")
    return "\n".join(lines) + "\n"

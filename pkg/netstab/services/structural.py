"""
Conjuntos estructurales sobre el grafo de interacciones.

Una rama es un camino (o ciclo) que empieza y termina en S sin vértices
interiores en S. S es completo si G - S es acíclico y todo vértice está en
alguna rama; es básico si además cada par de extremos tiene a lo sumo una rama.
"""
import logging
from dataclasses import dataclass, field

import networkx as nx
from django.conf import settings

from netstab.services.errors import StructuralSetError

logger = logging.getLogger(__name__)

DEFAULT_EXHAUSTIVE_LIMIT = 20


@dataclass(frozen=True)
class Branch:
    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        if len(self.vertices) < 2:
            raise StructuralSetError(f"una rama necesita al menos 2 vértices: {self.vertices}")

    @property
    def source(self):
        return self.vertices[0]

    @property
    def target(self):
        return self.vertices[-1]

    @property
    def interior(self):
        return self.vertices[1:-1]

    @property
    def is_cycle(self):
        return self.source == self.target

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __str__(self):
        return "->".join(self.vertices)


@dataclass(frozen=True)
class StructuralSetReport:
    structural_set: tuple
    complete: bool
    basic: bool
    branches: dict = field(hash=False)
    admissible: tuple = ()

    @property
    def size(self):
        return len(self.structural_set)


def validated_set(graph, structural_set):
    members = set(structural_set)
    unknown = members - set(graph.vertices)
    if unknown:
        raise StructuralSetError(f"vértices fuera del grafo: {sorted(unknown)}")
    return tuple(graph.sort_vertices(members))


def branch_set(graph, structural_set):
    """Todas las ramas, por búsqueda en profundidad desde cada vértice de S."""
    ordered = validated_set(graph, structural_set)
    members = set(ordered)
    found = []

    def extend(path):
        for successor in graph.successors(path[-1]):
            if successor in members:
                found.append(Branch(tuple(path) + (successor,)))
            elif successor not in path:
                extend(path + [successor])

    for start in ordered:
        extend([start])
    found.sort(key=lambda branch: tuple(graph.position(vertex) for vertex in branch.vertices))
    return found


def _reachable_outside(graph, members, neighbours):
    """Vértices fuera de S alcanzables desde S sin atravesar S."""
    seen = set()
    frontier = [v for s in members for v in neighbours(s) if v not in members]
    while frontier:
        vertex = frontier.pop()
        if vertex in seen:
            continue
        seen.add(vertex)
        frontier.extend(v for v in neighbours(vertex) if v not in members and v not in seen)
    return seen


def uncovered_vertices(graph, structural_set):
    """Vértices fuera de S que no están en ninguna rama (requiere G - S acíclico)."""
    members = set(structural_set)
    digraph = graph.digraph
    forward = _reachable_outside(graph, members, digraph.successors)
    backward = _reachable_outside(graph, members, digraph.predecessors)
    outside = set(graph.vertices) - members
    return graph.sort_vertices(outside - (forward & backward))


def _remainder_is_acyclic(graph, members):
    remainder = graph.digraph.subgraph(v for v in graph.vertices if v not in members)
    return nx.is_directed_acyclic_graph(remainder)


def is_complete_structural(graph, structural_set):
    members = set(validated_set(graph, structural_set))
    if not _remainder_is_acyclic(graph, members):
        return False
    return not uncovered_vertices(graph, members)


def _branches_by_pair(branches):
    grouped = {}
    for branch in branches:
        grouped.setdefault((branch.source, branch.target), []).append(branch)
    return grouped


def is_basic_structural(graph, structural_set):
    if not is_complete_structural(graph, structural_set):
        return False
    grouped = _branches_by_pair(branch_set(graph, structural_set))
    return all(len(branches) <= 1 for branches in grouped.values())


def admissible_sequences(graph, structural_set):
    return [branch for branch in branch_set(graph, structural_set) if len(branch) > 2]


def structural_report(graph, structural_set):
    ordered = validated_set(graph, structural_set)
    branches = branch_set(graph, ordered)
    grouped = _branches_by_pair(branches)
    complete = is_complete_structural(graph, ordered)
    basic = complete and all(len(group) <= 1 for group in grouped.values())
    return StructuralSetReport(
        structural_set=ordered,
        complete=complete,
        basic=basic,
        branches={pair: tuple(group) for pair, group in grouped.items()},
        admissible=tuple(branch for branch in branches if len(branch) > 2),
    )


def _induces_cycle(digraph, vertices):
    return not nx.is_directed_acyclic_graph(digraph.subgraph(vertices))


def _exhaustive_candidates(graph):
    """Subconjuntos con G - S acíclico, por tamaño y luego lexicográficamente.

    Cada vértice se incluye o se excluye en orden; una rama se corta en cuanto
    los vértices excluidos contienen un ciclo.
    """
    vertices = list(graph.vertices)
    digraph = graph.digraph
    n = len(vertices)

    def extend(position, chosen, excluded, size):
        missing = size - len(chosen)
        if missing == 0:
            if not _induces_cycle(digraph, excluded + vertices[position:]):
                yield tuple(chosen)
            return
        if n - position < missing:
            return
        vertex = vertices[position]
        yield from extend(position + 1, chosen + [vertex], excluded, size)
        if n - position - 1 >= missing and not _induces_cycle(digraph, excluded + [vertex]):
            yield from extend(position + 1, chosen, excluded + [vertex], size)

    for size in range(n + 1):
        yield from extend(0, [], [], size)


def greedy_feedback_set(graph):
    """Conjunto de vértices que rompe todos los ciclos (heurística voraz).

    Primero los lazos, luego el vértice cíclico de mayor grado_in * grado_out;
    al final se devuelven los que resultan innecesarios.
    """
    remaining = graph.digraph.copy()
    chosen = []
    while not nx.is_directed_acyclic_graph(remaining):
        loops = [v for v in remaining if remaining.has_edge(v, v)]
        if loops:
            pick = min(loops, key=graph.position)
        else:
            cyclic = [v for part in nx.strongly_connected_components(remaining) if len(part) > 1 for v in part]
            pick = max(
                cyclic,
                key=lambda v: (remaining.in_degree(v) * remaining.out_degree(v), -graph.position(v)),
            )
        chosen.append(pick)
        remaining.remove_node(pick)
    for vertex in list(chosen):
        trial = [v for v in chosen if v != vertex]
        if _remainder_is_acyclic(graph, set(trial)):
            chosen = trial
    return graph.sort_vertices(chosen)


def _greedy_candidates(graph):
    members = set(greedy_feedback_set(graph))
    while True:
        missing = uncovered_vertices(graph, members)
        if not missing:
            break
        members.add(missing[0])
    yield tuple(graph.sort_vertices(members))
    yield tuple(graph.vertices)


def find_structural_sets(graph, want_basic=False, max_results=10, exhaustive_limit=None):
    """Conjuntos completos (o básicos) ordenados por tamaño y luego lexicográficamente."""
    if max_results < 1:
        raise StructuralSetError("max_results debe ser positivo")
    limit = exhaustive_limit
    if limit is None:
        limit = int(getattr(settings, "NETSTAB_EXHAUSTIVE_LIMIT", DEFAULT_EXHAUSTIVE_LIMIT))
    exhaustive = len(graph.vertices) <= limit
    candidates = _exhaustive_candidates(graph) if exhaustive else _greedy_candidates(graph)

    reports = []
    seen = set()
    for candidate in candidates:
        if candidate in seen:
            continue
        seen.add(candidate)
        if not is_complete_structural(graph, candidate):
            continue
        report = structural_report(graph, candidate)
        if want_basic and not report.basic:
            continue
        reports.append(report)
        if len(reports) >= max_results:
            break
    reports.sort(key=lambda report: (report.size, tuple(graph.position(v) for v in report.structural_set)))
    logger.info(
        "find_structural_sets fin n=%s exhaustive=%s basic=%s results=%s",
        len(graph.vertices),
        exhaustive,
        want_basic,
        len(reports),
    )
    return reports

"""
Modelo de red dinámica con retardos.

Una red es una lista ordenada de nodos (id + dominio) y una expresión de
actualización por nodo. T = 1 + máximo retardo referenciado; T = 1 es una red
sin retardos. Las redes se construyen desde texto (build_network /
parse_network_file) o con el constructor Cohen-Grossberg.
"""
import logging
import re
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np
from django.conf import settings

from netstab.services.expr import (
    INTERNAL_FUNCTIONS,
    UNARY_FUNCTIONS,
    Const,
    Interval,
    Var,
    add,
    apply,
    format_bound,
    max_delay,
    mul,
    parse_expression,
    simplify,
    to_text,
    variables,
)
from netstab.services.errors import ExpressionSyntaxError, NetworkDefinitionError

logger = logging.getLogger(__name__)

DEFAULT_DELAY_CAP = 64
ACTIVATIONS = ("tanh", "linear")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Node:
    id: str
    domain: Interval = Interval.real_line()


@dataclass(frozen=True)
class CohenGrossbergParams:
    """Parámetros guardados por make_cohen_grossberg para la cota cerrada."""

    weights: tuple
    epsilon: float
    lipschitz: float


@dataclass(frozen=True)
class TimeDelayedNetwork:
    nodes: tuple
    updates: tuple
    name: str = field(default="network", compare=False)
    cohen_grossberg: CohenGrossbergParams | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "updates", tuple(self.updates))
        if len(self.nodes) != len(self.updates):
            raise NetworkDefinitionError("cada nodo necesita exactamente una regla de actualización")
        ids = [node.id for node in self.nodes]
        if len(set(ids)) != len(ids):
            raise NetworkDefinitionError(f"nodos duplicados en {ids}")
        declared = set(ids)
        for node, update in zip(self.nodes, self.updates):
            missing = sorted({ref for ref, _ in variables(update)} - declared)
            if missing:
                raise NetworkDefinitionError(f"la regla de {node.id} referencia nodos no declarados: {missing}")

    @property
    def node_ids(self):
        return tuple(node.id for node in self.nodes)

    @property
    def size(self):
        return len(self.nodes)

    @cached_property
    def T(self):
        return 1 + max((max_delay(update) for update in self.updates), default=0)

    @cached_property
    def _positions(self):
        return {node.id: k for k, node in enumerate(self.nodes)}

    def position(self, node_id):
        try:
            return self._positions[node_id]
        except KeyError:
            raise NetworkDefinitionError(f"nodo desconocido {node_id!r}") from None

    def domain(self, node_id):
        return self.nodes[self.position(node_id)].domain

    def update(self, node_id):
        return self.updates[self.position(node_id)]

    def references(self, node_id):
        """ℐ^j: pares (fuente, retardo) leídos por la regla de node_id."""
        return variables(self.update(node_id))

    def box(self):
        """Caja X^T: cada variable retardada recorre el dominio de su nodo."""
        return {
            key: self.domain(key[0])
            for update in self.updates
            for key in variables(update)
        }


@dataclass(frozen=True)
class InteractionGraph:
    vertices: tuple
    edges: dict = field(hash=False)

    @cached_property
    def digraph(self):
        graph = nx.DiGraph()
        graph.add_nodes_from(self.vertices)
        for (source, target), delays in self.edges.items():
            graph.add_edge(source, target, delays=delays)
        return graph

    @cached_property
    def _positions(self):
        return {vertex: k for k, vertex in enumerate(self.vertices)}

    def position(self, vertex):
        return self._positions[vertex]

    def successors(self, vertex):
        return sorted(self.digraph.successors(vertex), key=self.position)

    def sort_vertices(self, vertices):
        return sorted(vertices, key=self.position)

    def delays(self, source, target):
        return self.edges.get((source, target), frozenset())


def _delay_cap(delay_cap):
    if delay_cap is not None:
        return delay_cap
    return int(getattr(settings, "NETSTAB_DELAY_CAP", DEFAULT_DELAY_CAP))


def _validate_identifier(node_id):
    if not _IDENT_RE.fullmatch(node_id or ""):
        raise NetworkDefinitionError(f"identificador de nodo inválido {node_id!r}")
    if node_id in UNARY_FUNCTIONS + INTERNAL_FUNCTIONS:
        raise NetworkDefinitionError(f"el identificador {node_id!r} es una función reservada")


def _as_interval(domain):
    if domain is None:
        return Interval.real_line()
    if isinstance(domain, Interval):
        return domain
    lo, hi = domain
    return Interval(lo, hi)


def _parse_rule(node_id, text, declared):
    try:
        return parse_expression(text, declared)
    except ExpressionSyntaxError as exc:
        error = type(exc)(f"regla de {node_id}: {exc}")
        error.position = exc.position
        raise error from exc


def build_network(declarations, rules, name="network", delay_cap=None):
    """Construye y valida una red a partir de declaraciones y reglas en texto.

    declarations: lista de (id, Interval | (lo, hi) | None).
    rules: lista de (id, texto de la expresión), una por nodo declarado.
    """
    cap = _delay_cap(delay_cap)
    ids = []
    domains = {}
    for node_id, domain in declarations:
        _validate_identifier(node_id)
        if node_id in domains:
            raise NetworkDefinitionError(f"nodo declarado dos veces: {node_id}")
        ids.append(node_id)
        domains[node_id] = _as_interval(domain)

    texts = {}
    for node_id, text in rules:
        if node_id not in domains:
            raise NetworkDefinitionError(f"regla para un nodo no declarado: {node_id}")
        if node_id in texts:
            raise NetworkDefinitionError(f"regla duplicada para {node_id}")
        texts[node_id] = text
    missing = [node_id for node_id in ids if node_id not in texts]
    if missing:
        raise NetworkDefinitionError(f"faltan reglas para {', '.join(missing)}")

    updates = []
    for node_id in ids:
        tree = simplify(_parse_rule(node_id, texts[node_id], ids))
        deepest = max_delay(tree)
        if deepest > cap:
            raise NetworkDefinitionError(f"regla de {node_id}: retardo {deepest} supera el tope {cap}")
        updates.append(tree)

    net = TimeDelayedNetwork(
        nodes=tuple(Node(node_id, domains[node_id]) for node_id in ids),
        updates=tuple(updates),
        name=name,
    )
    logger.info("build_network fin name=%s n=%s T=%s", name, net.size, net.T)
    return net


def _integer_matrix(values, n, label):
    matrix = np.zeros((n, n), dtype=int) if values is None else np.asarray(values)
    if matrix.shape != (n, n):
        raise NetworkDefinitionError(f"{label}: se esperaba forma {(n, n)} y llegó {matrix.shape}")
    if np.any(matrix < 0) or np.any(matrix != np.round(matrix)):
        raise NetworkDefinitionError(f"{label}: los retardos deben ser enteros no negativos")
    return matrix.astype(int)


def make_cohen_grossberg(
    W,
    epsilon,
    activation="tanh",
    b=1.0,
    c=None,
    delays=None,
    self_delays=None,
    domains=None,
    node_ids=None,
    name="cohen_grossberg",
):
    """Red Cohen-Grossberg: x_j <- (1-ε)·x_j[-s_j] + Σ_i W_ij·φ(x_i[-τ_ij]) + c_j.

    W_ij es el peso con que el nodo j lee al nodo i. φ es tanh(b·) o b· (lineal);
    su constante de Lipschitz es |b|. s_j es el retardo propio (por defecto τ_jj).
    """
    weights = np.asarray(W, dtype=float)
    if weights.ndim != 2 or weights.shape[0] != weights.shape[1] or weights.shape[0] == 0:
        raise NetworkDefinitionError(f"W debe ser cuadrada, llegó forma {weights.shape}")
    if activation not in ACTIVATIONS:
        raise NetworkDefinitionError(f"activación desconocida {activation!r}; opciones: {ACTIVATIONS}")
    n = weights.shape[0]
    tau = _integer_matrix(delays, n, "delays")
    if self_delays is None:
        own = np.diag(tau)
    else:
        own = np.asarray(self_delays)
        if own.shape != (n,) or np.any(own < 0):
            raise NetworkDefinitionError(f"self_delays: se esperaba un vector de {n} enteros no negativos")
        own = own.astype(int)
    inputs = np.zeros(n) if c is None else np.broadcast_to(np.asarray(c, dtype=float), (n,))
    ids = list(node_ids) if node_ids is not None else [f"x{k + 1}" for k in range(n)]
    if len(ids) != n:
        raise NetworkDefinitionError(f"se esperaban {n} identificadores de nodo")
    for node_id in ids:
        _validate_identifier(node_id)
    node_domains = [None] * n if domains is None else list(domains)

    updates = []
    for j in range(n):
        update = mul(Const(1.0 - epsilon), Var(ids[j], int(own[j])))
        for i in range(n):
            if weights[i, j] == 0.0:
                continue
            argument = mul(Const(b), Var(ids[i], int(tau[i, j])))
            phi = apply("tanh", argument) if activation == "tanh" else argument
            update = add(update, mul(Const(weights[i, j]), phi))
        updates.append(add(update, Const(inputs[j])))

    net = TimeDelayedNetwork(
        nodes=tuple(Node(ids[k], _as_interval(node_domains[k])) for k in range(n)),
        updates=tuple(updates),
        name=name,
        cohen_grossberg=CohenGrossbergParams(
            weights=tuple(tuple(row) for row in weights.tolist()),
            epsilon=float(epsilon),
            lipschitz=abs(float(b)),
        ),
    )
    logger.info("make_cohen_grossberg fin n=%s T=%s activation=%s", n, net.T, activation)
    return net


def ring_network(size, c=0.0, weight=1.0, b=1.0, epsilon=1.0, prefix="v", name="ring"):
    """Anillo bidireccional: cada nodo lee a sus dos vecinos con peso `weight`."""
    if size < 2:
        raise NetworkDefinitionError("un anillo necesita al menos 2 nodos")
    W = np.zeros((size, size))
    for j in range(size):
        W[(j - 1) % size, j] += weight
        W[(j + 1) % size, j] += weight
    return make_cohen_grossberg(
        W,
        epsilon,
        activation="tanh",
        b=b,
        c=c,
        node_ids=[f"{prefix}{k + 1}" for k in range(size)],
        name=name,
    )


def interaction_graph(net):
    """Grafo de interacciones: arista (i, j) con los retardos a los que j lee a i."""
    edges = {}
    for target, update in zip(net.node_ids, net.updates):
        for source, delay in variables(update):
            edges.setdefault((source, target), set()).add(delay)
    ordered = sorted(edges, key=lambda edge: (net.position(edge[0]), net.position(edge[1])))
    return InteractionGraph(
        vertices=net.node_ids,
        edges={edge: frozenset(edges[edge]) for edge in ordered},
    )


def is_non_distributed(net):
    """True si cada regla lee cada fuente a lo sumo con un retardo."""
    for update in net.updates:
        sources = [source for source, _ in variables(update)]
        if len(sources) != len(set(sources)):
            return False
    return True


def max_delay_profile(net):
    profile = {node_id: 0 for node_id in net.node_ids}
    for update in net.updates:
        for source, delay in variables(update):
            profile[source] = max(profile[source], delay)
    return profile


# ---------------------------------------------------------------------------
# Formato de archivo
# ---------------------------------------------------------------------------

_NODE_RE = re.compile(
    r"^(?P<id>[A-Za-z_][A-Za-z0-9_]*)(?:\s+domain\s*\[\s*(?P<lo>[^,\]]+?)\s*,\s*(?P<hi>[^\]]+?)\s*\])?$"
)
_UPDATE_RE = re.compile(r"^(?P<id>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<expr>.+)$")


def _parse_bound(text, lineno):
    token = text.strip().lower()
    if token in ("inf", "+inf"):
        return float("inf")
    if token == "-inf":
        return float("-inf")
    try:
        value = float(token)
    except ValueError:
        raise NetworkDefinitionError(f"línea {lineno}: cota de dominio inválida {text!r}") from None
    if value != value:
        raise NetworkDefinitionError(f"línea {lineno}: cota de dominio inválida {text!r}")
    return value


def parse_network_file(text, delay_cap=None):
    """Lee el formato de texto `network` / `node` / `update` (comentarios con #)."""
    name = "network"
    declarations = []
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if keyword == "network":
            if not rest:
                raise NetworkDefinitionError(f"línea {lineno}: falta el nombre de la red")
            name = rest
        elif keyword == "node":
            match = _NODE_RE.match(rest)
            if match is None:
                raise NetworkDefinitionError(f"línea {lineno}: declaración de nodo inválida {rest!r}")
            domain = None
            if match.group("lo") is not None:
                lo = _parse_bound(match.group("lo"), lineno)
                hi = _parse_bound(match.group("hi"), lineno)
                if lo > hi or lo == float("inf") or hi == float("-inf"):
                    raise NetworkDefinitionError(f"línea {lineno}: dominio vacío [{lo}, {hi}]")
                domain = Interval(lo, hi)
            declarations.append((match.group("id"), domain))
        elif keyword == "update":
            match = _UPDATE_RE.match(rest)
            if match is None:
                raise NetworkDefinitionError(f"línea {lineno}: regla inválida {rest!r}")
            rules.append((match.group("id"), match.group("expr")))
        else:
            raise NetworkDefinitionError(f"línea {lineno}: palabra clave desconocida {keyword!r}")
    if not declarations:
        raise NetworkDefinitionError("el archivo no declara nodos")
    return build_network(declarations, rules, name=name, delay_cap=delay_cap)


def format_network_file(net):
    lines = [f"network {net.name}"]
    for node in net.nodes:
        lines.append(f"node {node.id} domain [{format_bound(node.domain.lo)},{format_bound(node.domain.hi)}]")
    for node_id, update in zip(net.node_ids, net.updates):
        lines.append(f"update {node_id} = {to_text(update)}")
    return "\n".join(lines) + "\n"

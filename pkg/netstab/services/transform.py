"""
Restricción, expansión y expansión retardada respecto de un conjunto
estructural completo S, por sustitución simbólica de las reglas.

Cada variable x_i con i fuera de S se reemplaza por la regla de i, en
profundidad y de izquierda a derecha, hasta que todas las hojas son variables
de S. La rama γ = ℓ_1,…,ℓ_N de cada hoja decide qué lee:
- restrict: x_{ℓ_1},
- expand: la coordenada (γ, N-1) de la cadena de γ si N > 2,
- delayed_expansion: x_{ℓ_1} con retardo N-2.
"""
import logging
from dataclasses import dataclass, field

from netstab.services.delays import AugmentedNetwork, SequenceIndex, StateIndex, check_labels
from netstab.services.errors import TransformError
from netstab.services.expr import (
    ONE,
    ZERO,
    Binary,
    Const,
    Unary,
    Var,
    apply,
    cancel_pairs,
    div,
    mul,
    rebuild_sum,
    signed_terms,
    simplify,
    substitute,
    to_text,
)
from netstab.services.network import Node, TimeDelayedNetwork, interaction_graph
from netstab.services.structural import Branch, admissible_sequences, is_complete_structural, validated_set

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InlineTrace:
    """Hojas por componente de S: la rama γ de cada variable que quedó tras sustituir."""

    structural_set: tuple
    leaves: dict = field(hash=False)


def _prepare(net, structural_set):
    if net.T > 1:
        raise TransformError(f"la red {net.name} tiene retardos (T={net.T}); aplique undelay primero")
    graph = interaction_graph(net)
    ordered = validated_set(graph, structural_set)
    if not is_complete_structural(graph, ordered):
        raise TransformError(f"{{{', '.join(ordered)}}} no es un conjunto estructural completo de {net.name}")
    return graph, ordered


def _inline(net, members, target, leaf):
    leaves = []

    def visit(expression, suffix):
        def replace(var):
            if var.node in members:
                branch = Branch((var.node,) + suffix)
                leaves.append(branch)
                return leaf(var, branch)
            return visit(net.update(var.node), (var.node,) + suffix)

        return substitute(expression, replace)

    return visit(net.update(target), (target,)), leaves


def _restrict_leaf(var, branch):
    return Var(branch.source)


def _expand_leaf(var, branch):
    if len(branch) > 2:
        return Var(SequenceIndex(branch.vertices, len(branch) - 1).label)
    return Var(branch.source)


def _delayed_leaf(var, branch):
    return Var(branch.source, len(branch) - 2)


def _inlined_updates(net, ordered, leaf):
    members = set(ordered)
    updates = []
    for target in ordered:
        expression, _ = _inline(net, members, target, leaf)
        updates.append(simplify(expression))
    return updates


def inline_trace(net, structural_set):
    _, ordered = _prepare(net, structural_set)
    members = set(ordered)
    leaves = {target: tuple(_inline(net, members, target, _restrict_leaf)[1]) for target in ordered}
    return InlineTrace(structural_set=ordered, leaves=leaves)


def restrict(net, structural_set):
    """𝓡_S: red sobre S sin retardos."""
    _, ordered = _prepare(net, structural_set)
    updates = _inlined_updates(net, ordered, _restrict_leaf)
    restricted = TimeDelayedNetwork(
        nodes=tuple(Node(node_id, net.domain(node_id)) for node_id in ordered),
        updates=tuple(updates),
        name=f"{net.name}_restricted",
    )
    logger.info("restrict fin name=%s S=%s", net.name, ",".join(ordered))
    return restricted


def expand(net, structural_set):
    """𝒳_S: nodos de S más N-2 coordenadas de retardo por secuencia admisible."""
    graph, ordered = _prepare(net, structural_set)
    admissible = admissible_sequences(graph, ordered)
    chains = [SequenceIndex(branch.vertices, position) for branch in admissible for position in range(2, len(branch))]
    indices = tuple(StateIndex(node_id) for node_id in ordered) + tuple(chains)
    check_labels(indices, "expand")

    nodes = [Node(node_id, net.domain(node_id)) for node_id in ordered]
    updates = _inlined_updates(net, ordered, _expand_leaf)
    for index in chains:
        nodes.append(Node(index.label, net.domain(index.sequence[0])))
        if index.position == 2:
            updates.append(Var(index.sequence[0]))
        else:
            updates.append(Var(SequenceIndex(index.sequence, index.position - 1).label))

    expanded = TimeDelayedNetwork(nodes=tuple(nodes), updates=tuple(updates), name=f"{net.name}_expanded")
    logger.info("expand fin name=%s S=%s dim=%s admissible=%s", net.name, ",".join(ordered), len(indices), len(admissible))
    return AugmentedNetwork(network=expanded, indices=indices)


def delayed_expansion(net, structural_set):
    """𝒟_S: red sobre S cuyas hojas leen x_{ℓ_1} con retardo |γ| - 2."""
    _, ordered = _prepare(net, structural_set)
    updates = _inlined_updates(net, ordered, _delayed_leaf)
    delayed = TimeDelayedNetwork(
        nodes=tuple(Node(node_id, net.domain(node_id)) for node_id in ordered),
        updates=tuple(updates),
        name=f"{net.name}_delayed_expansion",
    )
    logger.info("delayed_expansion fin name=%s S=%s T=%s", net.name, ",".join(ordered), delayed.T)
    return delayed


def sequential_restrict(net, structural_sets):
    """Restricciones sucesivas; cada conjunto debe ser completo en la red ya restringida."""
    current = net
    for structural_set in structural_sets:
        current = restrict(current, structural_set)
    return current


# ---------------------------------------------------------------------------
# Normalización
# ---------------------------------------------------------------------------


def _split_sign(term):
    if isinstance(term, Unary) and term.func == "neg":
        return -1, term.arg
    if isinstance(term, Binary) and term.op == "mul" and isinstance(term.left, Const) and term.left.value < 0:
        magnitude = -term.left.value
        return -1, term.right if magnitude == 1.0 else Binary("mul", Const(magnitude), term.right)
    return 1, term


def _normalize_sum(e):
    constant = 0.0
    terms = []
    for sign, term in signed_terms(e):
        term = _canonical(term)
        if isinstance(term, Const):
            constant += sign * term.value
            continue
        flip, term = _split_sign(term)
        terms.append((sign * flip, term))
    terms, _ = cancel_pairs(terms)
    terms.sort(key=lambda item: (to_text(item[1]), item[0]))
    if constant != 0.0:
        terms.append((1, Const(constant)))
    return rebuild_sum(terms)


def _product_factors(e):
    if isinstance(e, Binary) and e.op == "mul":
        return _product_factors(e.left) + _product_factors(e.right)
    return [e]


def _normalize_product(e):
    constant = 1.0
    factors = []
    for factor in _product_factors(e):
        factor = _canonical(factor)
        if isinstance(factor, Unary) and factor.func == "neg":
            constant = -constant
            factor = factor.arg
        if isinstance(factor, Const):
            constant *= factor.value
            continue
        factors.append(factor)
    if constant == 0.0:
        return ZERO
    factors.sort(key=to_text)
    result = ONE if constant == 1.0 else Const(constant)
    for factor in factors:
        result = mul(result, factor)
    return result


def _canonical(e):
    if isinstance(e, Unary):
        return apply(e.func, _canonical(e.arg))
    if isinstance(e, Binary):
        if e.op in ("add", "sub"):
            return _normalize_sum(e)
        if e.op == "mul":
            return _normalize_product(e)
        return div(_canonical(e.left), _canonical(e.right))
    return e


def normalize(e):
    """Plegado de constantes más orden canónico de operandos conmutativos."""
    return _canonical(simplify(e))

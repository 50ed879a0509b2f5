"""
Redes de ejemplo y regresiones numéricas con sus valores cerrados conocidos.

Cada ejemplo es un constructor; run_regressions() compara lo que calcula la
librería con las fórmulas cerradas (anillos Cohen-Grossberg, retardos
cruzados, punto fijo repulsor, restricción y expansión de un anillo).
"""
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from netstab.services.delays import undelay
from netstab.services.expr import eval_point, variables
from netstab.services.network import build_network, interaction_graph, make_cohen_grossberg, ring_network
from netstab.services.spectral import NonnegMatrix, spectral_radius
from netstab.services.stability import analyze, local_spectral_radius
from netstab.services.structural import is_basic_structural, is_complete_structural
from netstab.services.transform import delayed_expansion, expand, normalize, restrict

logger = logging.getLogger(__name__)


def sech(x):
    return 1.0 / math.cosh(x)


def example_1(size=6, a=0.3, b=1.0, epsilon=0.5, c=0.0):
    """Anillo Cohen-Grossberg: x_j <- (1-ε)x_j + a[tanh(b x_{j-1}) + tanh(b x_{j+1})] + c."""
    return ring_network(size, c=c, weight=a, b=b, epsilon=epsilon, prefix="x", name="example_1")


def example_2(epsilon=0.5, a=0.1, b=1.0, c=(0.0, 0.0)):
    """Dos nodos con retardo propio 1 y retardo cruzado 3."""
    return make_cohen_grossberg(
        [[0.0, 2 * a], [2 * a, 0.0]],
        epsilon,
        activation="tanh",
        b=b,
        c=c,
        delays=[[1, 3], [3, 1]],
        name="example_2",
    )


def example_3(epsilon=0.5, b=1.0):
    """Retardo distribuido: x_j <- (1-ε)x_j + tanh(b x_k) - tanh(b x_k[-1])."""
    leak = repr(1.0 - epsilon)
    gain = repr(float(b))
    return build_network(
        [("x1", None), ("x2", None)],
        [
            ("x1", f"{leak}*x1 + tanh({gain}*x2) - tanh({gain}*x2[-1])"),
            ("x2", f"{leak}*x2 + tanh({gain}*x1) - tanh({gain}*x1[-1])"),
        ],
        name="example_3",
    )


def example_4(epsilon=0.5, a=0.1, b=1.0, c=(0.0, 0.0)):
    return replace(undelay(example_2(epsilon, a, b, c)), name="example_4")


def example_5(n=2, c=3.0):
    """Anillo de 2n nodos v1..v2n: v_j <- tanh(v_{j-1}) + tanh(v_{j+1}) + c."""
    return ring_network(2 * n, c=c, prefix="v", name="example_5")


def example_6():
    return build_network(
        [(f"v{k}", None) for k in range(1, 7)],
        [
            ("v1", "0.5*tanh(v6)"),
            ("v2", "0.5*tanh(v1)"),
            ("v3", "0.3*tanh(v2) + 0.3*tanh(v5) + 0.3*tanh(v6)"),
            ("v4", "0.5*tanh(v3)"),
            ("v5", "0.3*tanh(v2) + 0.3*tanh(v3) + 0.3*tanh(v4)"),
            ("v6", "0.5*tanh(v5)"),
        ],
        name="example_6",
    )


def example_7(n=2, c=3.0):
    return replace(example_5(n, c), name="example_7")


def even_vertices(net):
    return tuple(node_id for k, node_id in enumerate(net.node_ids) if k % 2 == 1)


EXAMPLE_6_SET = ("v1", "v3", "v5")


def stability_threshold(family, lo, hi, tol=1e-4):
    """Bisección del parámetro donde ρ(family(p)) cruza 1 (ρ >= 1 en lo, ρ < 1 en hi)."""
    if family(lo) < 1.0 or family(hi) >= 1.0:
        raise ValueError(f"el intervalo [{lo}, {hi}] no encierra el cambio de veredicto")
    while hi - lo > tol:
        middle = 0.5 * (lo + hi)
        if family(middle) < 1.0:
            hi = middle
        else:
            lo = middle
    return 0.5 * (lo + hi)


def restriction_identity_holds(net, structural_set, points=1000, seed=0, tol=1e-12):
    """undelay(delayed_expansion) == restrict: árboles normalizados y evaluación en puntos."""
    restricted = restrict(net, structural_set)
    flattened = undelay(delayed_expansion(net, structural_set))
    if restricted.node_ids != flattened.node_ids:
        return False
    rng = np.random.default_rng(seed)
    for left, right in zip(restricted.updates, flattened.updates):
        if normalize(left) != normalize(right):
            return False
        keys = sorted(variables(left) | variables(right))
        for _ in range(points):
            assignment = {key: rng.uniform(-3.0, 3.0) for key in keys}
            if abs(eval_point(left, assignment) - eval_point(right, assignment)) > tol:
                return False
    return True


@dataclass(frozen=True)
class RegressionCheck:
    name: str
    expected: float
    observed: float
    tolerance: float

    @property
    def passed(self):
        return abs(self.expected - self.observed) <= self.tolerance


def _cross_delay_rho(epsilon, a, b):
    leak = abs(1.0 - epsilon)
    return math.sqrt((leak + math.sqrt(leak**2 + 8.0 * abs(a * b))) / 2.0)


def iter_regressions():
    """Genera las regresiones una a una (para mostrar progreso)."""
    ring = example_1(size=6, a=0.3, b=1.0, epsilon=0.5)
    weights = np.abs(np.array(ring.cohen_grossberg.weights))
    yield RegressionCheck("ex1 rho(|W|) = 2|a|", 0.6, spectral_radius(NonnegMatrix(weights)), 1e-10)
    yield RegressionCheck("ex1 rho = |1-eps| + 2|ab|", 1.1, analyze(ring).rho, 1e-10)

    yield RegressionCheck("ex2 rho (cross delays)", _cross_delay_rho(0.5, 0.1, 1.0), analyze(example_2()).rho, 1e-8)

    yield RegressionCheck("ex3 local rho at (0,0)", (1.0 + math.sqrt(17.0)) / 4.0, local_spectral_radius(example_3(), [0.0, 0.0]), 1e-9)
    yield RegressionCheck("ex3 undelayed rho", 0.5, analyze(undelay(example_3())).rho, 1e-10)

    yield RegressionCheck("ex4 rho = |1-eps| + 2|ab|", 0.7, analyze(example_4()).rho, 1e-10)

    for n in (2, 3, 4):
        yield RegressionCheck(f"ex5 ring 2n={2 * n} rho", 2.0, analyze(example_5(n, 3.0)).rho, 1e-10)
    for c in (2.0, 3.0, 4.0):
        net = example_5(2, c)
        expanded = expand(net, even_vertices(net))
        yield RegressionCheck(f"ex5 expansion rho c={c:g}", 2.0 * sech(c - 2.0), analyze(expanded).rho, 1e-8)

    def expansion_rho(c):
        net = example_5(2, c)
        return analyze(expand(net, even_vertices(net))).rho

    crossover = stability_threshold(expansion_rho, 2.0, 6.0)
    yield RegressionCheck("ex5 threshold c*", 2.0 + math.acosh(2.0), crossover, 1e-3)

    graph = interaction_graph(example_6())
    yield RegressionCheck("ex6 {v1,v3,v5} complete", 1.0, float(is_complete_structural(graph, EXAMPLE_6_SET)), 0.0)
    yield RegressionCheck("ex6 {v1,v3,v5} basic", 0.0, float(is_basic_structural(graph, EXAMPLE_6_SET)), 0.0)

    for c in (2.0, 3.0, 4.0):
        net = example_7(2, c)
        restricted = restrict(net, even_vertices(net))
        yield RegressionCheck(f"ex7 restriction rho c={c:g}", 4.0 * sech(c - 2.0) ** 2, analyze(restricted).rho, 1e-8)

    for label, net, structural_set in (
        ("ex5", example_5(2, 3.0), ("v2", "v4")),
        ("ex6", example_6(), EXAMPLE_6_SET),
        ("ex7", example_7(3, 3.0), ("v2", "v4", "v6")),
    ):
        holds = restriction_identity_holds(net, structural_set, points=50)
        yield RegressionCheck(f"{label} restrict = undelay(delayed_expansion)", 1.0, float(holds), 0.0)


def run_regressions():
    checks = list(iter_regressions())
    failed = [check.name for check in checks if not check.passed]
    logger.info("run_regressions fin total=%s fallidas=%s", len(checks), len(failed))
    return checks

"""
Matrices de estabilidad y veredictos.

La entrada (fila j, columna i) acota sup |∂F_j/∂x_i| sobre la caja de dominios,
calculada con differentiate + eval_interval. Si ρ < 1 la red tiene un punto fijo
globalmente atractor; ρ >= 1 no concluye nada.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from netstab.services.delays import AugmentedNetwork, StateIndex, dedelay, undelay
from netstab.services.errors import EvaluationError
from netstab.services.expr import ZERO, differentiate, eval_interval, eval_point, format_var, to_text, variables
from netstab.services.spectral import NonnegMatrix, signed_spectral_radius, spectral_radius
from netstab.services.transform import expand, restrict

logger = logging.getLogger(__name__)

VERDICT_GUARD = 1e-12
STABLE = "stable"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class StabilityReport:
    network: str
    matrix: NonnegMatrix
    rho: float
    verdict: str
    boundary: bool
    provenance: dict = field(default_factory=dict, hash=False)
    cohen_grossberg_bound: float | None = None

    @property
    def labels(self):
        return tuple(getattr(index, "label", str(index)) for index in self.matrix.indices)


def verdict_for(rho):
    """(veredicto, frontera) con banda de guarda VERDICT_GUARD alrededor de 1."""
    if abs(rho - 1.0) <= VERDICT_GUARD:
        return INCONCLUSIVE, True
    return (STABLE if rho < 1.0 else INCONCLUSIVE), False


def _as_augmented(net):
    if isinstance(net, AugmentedNetwork):
        return net
    if net.T > 1:
        return dedelay(net)
    return AugmentedNetwork(network=net, indices=tuple(StateIndex(node_id) for node_id in net.node_ids))


def assemble(net):
    """(matriz, procedencia) de una red; de-retarda primero si T > 1.

    La procedencia mapea "fila<-columna" al texto de la derivada que produjo la cota.
    """
    augmented = _as_augmented(net)
    network = augmented.network
    box = network.box()
    values = np.zeros((network.size, network.size))
    provenance = {}
    for row, (target, update) in enumerate(zip(network.node_ids, network.updates)):
        for source, delay in sorted(variables(update), key=lambda key: (network.position(key[0]), key[1])):
            partial = differentiate(update, (source, delay))
            if partial == ZERO:
                continue
            try:
                bound = eval_interval(partial, box, require_finite=True).abs_sup()
            except EvaluationError as exc:
                raise type(exc)(
                    f"regla de {target}, derivada respecto de {format_var(source, delay)} = {to_text(partial)}: {exc}"
                ) from exc
            values[row, network.position(source)] += bound
            provenance[f"{target}<-{format_var(source, delay)}"] = to_text(partial)
    return NonnegMatrix(values, indices=augmented.indices), provenance


def stability_matrix(net):
    matrix, _ = assemble(net)
    return matrix


def analyze(net):
    matrix, provenance = assemble(net)
    rho = spectral_radius(matrix)
    verdict, boundary = verdict_for(rho)
    base = net.network if isinstance(net, AugmentedNetwork) else net
    closed_form = None
    if base.cohen_grossberg is not None:
        params = base.cohen_grossberg
        closed_form = cohen_grossberg_bound(params.weights, params.epsilon, params.lipschitz)
    logger.info("analyze fin name=%s dim=%s rho=%.10g verdict=%s", base.name, matrix.n, rho, verdict)
    return StabilityReport(
        network=base.name,
        matrix=matrix,
        rho=rho,
        verdict=verdict,
        boundary=boundary,
        provenance=provenance,
        cohen_grossberg_bound=closed_form,
    )


def cohen_grossberg_matrix(W, epsilon, lipschitz):
    """Diagonal |1-ε| + |W_jj|·𝓛, fuera de la diagonal |W_ij|·𝓛 en la fila j."""
    weights = np.abs(np.asarray(W, dtype=float))
    values = weights.T * abs(lipschitz)
    values[np.diag_indices_from(values)] += abs(1.0 - epsilon)
    return NonnegMatrix(values)


def cohen_grossberg_bound(W, epsilon, lipschitz):
    """|1-ε| + 𝓛·ρ(|W|)."""
    weights = NonnegMatrix(np.abs(np.asarray(W, dtype=float)))
    return abs(1.0 - epsilon) + abs(lipschitz) * spectral_radius(weights)


def jacobian_at(net, point):
    """Jacobiano exacto (con signo) en la historia constante igual a `point`.

    point: dict nodo -> valor o secuencia en el orden de los nodos originales.
    Devuelve (etiquetas, matriz numpy).
    """
    augmented = _as_augmented(net)
    network = augmented.network
    if not isinstance(point, dict):
        originals = [index.origin[0] for index in augmented.indices if index.is_base]
        point = dict(zip(originals, point))
    assignment = {}
    for index in augmented.indices:
        try:
            assignment[(index.label, 0)] = float(point[index.origin[0]])
        except KeyError:
            raise EvaluationError(f"falta el valor de {index.origin[0]} en el punto") from None
    values = np.zeros((network.size, network.size))
    for row, update in enumerate(network.updates):
        for source, delay in variables(update):
            partial = differentiate(update, (source, delay))
            values[row, network.position(source)] += eval_point(partial, assignment)
    return augmented.labels, values


def local_spectral_radius(net, point):
    _, jacobian = jacobian_at(net, point)
    return signed_spectral_radius(jacobian)


def compare(net, structural_set=None):
    """Reportes lado a lado: original, sin retardos (si T > 1), restricción y expansión."""
    reports = {"original": analyze(net)}
    base = net
    if net.T > 1:
        base = undelay(net)
        reports["undelayed"] = analyze(base)
    if structural_set:
        reports["restriction"] = analyze(restrict(base, structural_set))
        reports["expansion"] = analyze(expand(base, structural_set))
    logger.info(
        "compare fin name=%s %s",
        net.name,
        " ".join(f"{key}={report.rho:.6g}" for key, report in reports.items()),
    )
    return reports

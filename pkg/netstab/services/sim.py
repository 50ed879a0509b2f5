"""
Simulación de órbitas, búsqueda de puntos fijos, veredicto empírico de
atracción global y chequeo de conjugación con la red de-retardada.

Un veredicto `converged` es evidencia numérica, no una demostración.
"""
import csv
import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from netstab.services.delays import dedelay, undelay
from netstab.services.errors import ConvergenceError, DivergenceError, EvaluationError
from netstab.services.expr import Interval, eval_array, eval_point, format_bound, variables
from netstab.services.spectral import max_iterations

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_BOX = 10.0
CONJUGACY_TOL = 1e-12
CONVERGENCE_CHECK_EVERY = 100


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Instantáneas x^{-T+1}, …, x^0, x^1, …, x^K (filas) sobre los nodos (columnas)."""

    nodes: tuple
    snapshots: np.ndarray
    history_length: int
    left_domain: tuple = ()

    @property
    def steps(self):
        return self.snapshots.shape[0] - self.history_length

    def snapshot(self, k):
        return self.snapshots[k + self.history_length - 1]

    def write_csv(self, stream):
        writer = csv.writer(stream)
        writer.writerow(["step", *self.nodes])
        for row, values in enumerate(self.snapshots):
            writer.writerow([row - self.history_length + 1, *(repr(float(v)) for v in values)])


@dataclass(frozen=True)
class AttractionVerdict:
    converged: bool
    witness: tuple | None
    final_diameter: float
    iterations_used: int
    trials: int
    seed: int
    tol: float


def _history_rows(net, history):
    """Historia x^0, x^{-1}, …, x^{-T+1} (la más reciente primero) a filas de la más antigua a la más nueva."""
    rows = np.asarray(history, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    if rows.shape != (net.T, net.size):
        raise EvaluationError(
            f"se esperaban {net.T} instantáneas de {net.size} valores, llegó forma {rows.shape}"
        )
    return rows[::-1].copy()


def _outside_domain(net, values):
    return any(not node.domain.contains(value) for node, value in zip(net.nodes, values))


def iterate_orbit(net, history, steps):
    """Órbita hacia adelante con eval_point; marca los pasos que salen del dominio."""
    rows = _history_rows(net, history)
    if any(_outside_domain(net, row) for row in rows):
        logger.warning("iterate_orbit historia fuera del dominio name=%s", net.name)
    positions = {node_id: k for k, node_id in enumerate(net.node_ids)}
    keys = sorted({key for update in net.updates for key in variables(update)})
    snapshots = list(rows)
    left_domain = []
    for step in range(1, steps + 1):
        assignment = {(node_id, delay): snapshots[-1 - delay][positions[node_id]] for node_id, delay in keys}
        current = np.array([eval_point(update, assignment) for update in net.updates])
        if not np.all(np.isfinite(current)):
            raise DivergenceError(f"la órbita de {net.name} produjo un valor no finito", step=step)
        if _outside_domain(net, current):
            left_domain.append(step)
        snapshots.append(current)
    return Trajectory(
        nodes=net.node_ids,
        snapshots=np.array(snapshots),
        history_length=net.T,
        left_domain=tuple(left_domain),
    )


def find_fixed_point(net, guess=None, tol=1e-10, max_iters=None):
    """Punto x̃ con d_max(x̃, H(x̃, …, x̃)) <= tol por iteración amortiguada de 𝒰_H."""
    if tol <= 0:
        raise EvaluationError("tol debe ser positiva")
    flat = undelay(net)
    cap = max_iterations(max_iters)
    x = np.zeros(flat.size) if guess is None else np.asarray(guess, dtype=float).copy()
    if x.shape != (flat.size,):
        raise EvaluationError(f"el punto inicial debe tener {flat.size} valores")
    damping = 1.0
    previous = np.inf
    for iteration in range(1, cap + 1):
        assignment = {(node_id, 0): value for node_id, value in zip(flat.node_ids, x)}
        image = np.array([eval_point(update, assignment) for update in flat.updates])
        if not np.all(np.isfinite(image)):
            raise DivergenceError("la búsqueda de punto fijo produjo un valor no finito", step=iteration)
        residual = float(np.max(np.abs(image - x))) if x.size else 0.0
        if residual <= tol:
            logger.info("find_fixed_point fin name=%s iters=%s residual=%.3g", net.name, iteration, residual)
            return x
        if residual > previous and damping == 1.0:
            damping = 0.5
            logger.debug("find_fixed_point amortiguamiento name=%s iter=%s", net.name, iteration)
        x = x + damping * (image - x)
        previous = residual
    raise ConvergenceError(f"sin punto fijo tras {cap} iteraciones (tol={tol})")


def _sampling_box(net, sample_box):
    half_width = float(getattr(settings, "NETSTAB_SAMPLE_BOX", DEFAULT_SAMPLE_BOX))
    boxes = []
    for node in net.nodes:
        if isinstance(sample_box, Interval):
            box = sample_box
        elif isinstance(sample_box, dict) and node.id in sample_box:
            box = sample_box[node.id]
        else:
            box = Interval(max(node.domain.lo, -half_width), min(node.domain.hi, half_width))
        if not box.is_bounded:
            raise EvaluationError(f"caja de muestreo no acotada para {node.id}: {format_bound(box.lo)}, {format_bound(box.hi)}")
        boxes.append(box)
    return boxes


def random_history(net, seed=0, sample_box=None):
    """Historia aleatoria (la más reciente primero) dentro de la caja de muestreo."""
    rng = np.random.default_rng(seed)
    boxes = _sampling_box(net, sample_box)
    lows = np.array([box.lo for box in boxes])
    highs = np.array([box.hi for box in boxes])
    return rng.uniform(lows, highs, size=(net.T, net.size))


def _spread(states):
    """Diámetro d_max de un conjunto de estados: máximo por nodo de (máx - mín)."""
    return float(np.max(np.max(states, axis=-1) - np.min(states, axis=-1))) if states.size else 0.0


def verify_global_attraction(net, trials=20, steps=5000, sample_box=None, tol=1e-6, seed=0):
    """Itera `trials` historias aleatorias y exige extremos que coincidan y diámetros que no crezcan."""
    if trials < 2:
        raise EvaluationError("se necesitan al menos 2 ensayos")
    rng = np.random.default_rng(seed)
    boxes = _sampling_box(net, sample_box)
    lows = np.array([box.lo for box in boxes])
    highs = np.array([box.hi for box in boxes])
    # buffer[k] tiene forma (n, trials); la última entrada es el estado actual
    buffer = [rng.uniform(lows[:, None], highs[:, None], size=(net.size, trials)) for _ in range(net.T)]
    positions = {node_id: k for k, node_id in enumerate(net.node_ids)}

    def lookup(node_id, delay):
        return buffer[-1 - delay][positions[node_id]]

    orbit = [buffer[-1]]
    used = 0
    with np.errstate(all="ignore"):
        for step in range(1, steps + 1):
            current = np.vstack(
                [np.broadcast_to(eval_array(update, lookup), (trials,)) for update in net.updates]
            )
            if not np.all(np.isfinite(current)):
                raise DivergenceError(f"la órbita de {net.name} produjo un valor no finito", step=step)
            buffer.append(current)
            if len(buffer) > net.T:
                buffer.pop(0)
            orbit.append(current)
            used = step
            if step % CONVERGENCE_CHECK_EVERY == 0:
                settled = _spread(current) <= tol * 1e-3 and float(np.max(np.abs(current - orbit[-2]))) <= tol * 1e-3
                if settled:
                    break

    history = np.array(orbit)  # (pasos + 1, n, trials)
    final_diameter = _spread(history[-1])
    quarter = history[len(history) * 3 // 4 :]
    half = max(1, len(quarter) // 2)
    shrinking = True
    for trial in range(trials):
        first = quarter[:half, :, trial].T
        second = quarter[half:, :, trial].T
        if second.size and _spread(second) > _spread(first) + tol * 1e-3:
            shrinking = False
            break
    converged = final_diameter <= tol and shrinking
    witness = tuple(float(v) for v in history[-1].mean(axis=1)) if converged else None
    logger.info(
        "verify_global_attraction fin name=%s converged=%s diameter=%.3g iters=%s trials=%s seed=%s",
        net.name,
        converged,
        final_diameter,
        used,
        trials,
        seed,
    )
    return AttractionVerdict(
        converged=converged,
        witness=witness,
        final_diameter=final_diameter,
        iterations_used=used,
        trials=trials,
        seed=seed,
        tol=tol,
    )


def conjugacy_check(net, history, steps, augmented=None):
    """¿La proyección de la órbita de-retardada coincide con la órbita retardada?

    augmented permite pasar una red aumentada propia (por ejemplo, mal cableada).
    """
    orbit = iterate_orbit(net, history, steps)
    augmented = augmented or dedelay(net)
    newest_first = np.asarray(history, dtype=float).reshape(net.T, net.size)
    positions = {node_id: k for k, node_id in enumerate(net.node_ids)}
    initial = [newest_first[depth][positions[node_id]] for node_id, depth in (index.origin for index in augmented.indices)]
    augmented_orbit = iterate_orbit(augmented.network, [initial], steps)
    columns = [augmented.network.position(node_id) for node_id in net.node_ids]
    projected = augmented_orbit.snapshots[1:, columns]
    delayed = orbit.snapshots[net.T :]
    agree = bool(np.all(np.abs(projected - delayed) <= CONJUGACY_TOL))
    logger.debug("conjugacy_check fin name=%s steps=%s agree=%s", net.name, steps, agree)
    return agree

"""
Matrices no negativas: componentes fuertemente conexas, radio espectral por
iteración de potencias, irreducibilidad, vector de Perron y extensión M_θ.
"""
import logging
from dataclasses import dataclass

import networkx as nx
import numpy as np
from django.conf import settings

from netstab.services.errors import ConvergenceError, MatrixError, NotIrreducibleError, UnknownIndexError

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERS = 100000
POWER_BUDGET = 20000
ABSOLUTE_TOL = 1e-10
RELATIVE_TOL = 1e-12
DENSE_SLACK = 1e-9
RESIDUAL_TOL = 1e-8
SPLIT_TOL = 1e-12


def max_iterations(max_iters=None):
    if max_iters is not None:
        return int(max_iters)
    return int(getattr(settings, "NETSTAB_MAX_ITERS", DEFAULT_MAX_ITERS))


@dataclass(frozen=True, eq=False)
class NonnegMatrix:
    """Matriz cuadrada no negativa y finita sobre una lista ordenada de índices."""

    values: np.ndarray
    indices: tuple = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] < 1:
            raise MatrixError(f"se esperaba una matriz cuadrada no vacía, llegó forma {values.shape}")
        if not np.all(np.isfinite(values)):
            raise MatrixError("la matriz tiene entradas no finitas")
        if np.any(values < 0):
            raise MatrixError("la matriz tiene entradas negativas")
        values.setflags(write=False)
        indices = tuple(self.indices) if len(self.indices) else tuple(range(values.shape[0]))
        if len(indices) != values.shape[0]:
            raise MatrixError(f"{len(indices)} índices para una matriz de orden {values.shape[0]}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "indices", indices)

    @property
    def n(self):
        return self.values.shape[0]

    def __getitem__(self, key):
        return float(self.values[key])

    def position(self, key):
        if key in self.indices:
            return self.indices.index(key)
        if isinstance(key, (int, np.integer)) and 0 <= key < self.n:
            return int(key)
        raise UnknownIndexError(f"índice desconocido {key!r}")

    def to_lists(self):
        return self.values.tolist()

    def digraph(self):
        """Grafo con arista i -> j si M_ij > 0 (vértices = posiciones)."""
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        rows, cols = np.nonzero(self.values)
        graph.add_edges_from(zip(rows.tolist(), cols.tolist()))
        return graph


@dataclass(frozen=True)
class Component:
    members: tuple
    trivial: bool


def strongly_connected_components(M):
    """Componentes fuertes en orden topológico inverso (sumideros primero)."""
    condensed = nx.condensation(M.digraph())
    components = []
    for node in reversed(list(nx.topological_sort(condensed))):
        members = tuple(sorted(condensed.nodes[node]["members"]))
        trivial = len(members) == 1 and M.values[members[0], members[0]] == 0.0
        components.append(Component(members=members, trivial=trivial))
    return components


def _bracket_tol(high):
    return max(ABSOLUTE_TOL, RELATIVE_TOL * high)


def _dense_perron(block):
    """Raíz de Perron y su vector por descomposición densa (numpy)."""
    eigenvalues, vectors = np.linalg.eig(block)
    k = int(np.argmax(eigenvalues.real))
    vector = np.abs(vectors[:, k].real)
    top = float(vector.max())
    if not np.isfinite(eigenvalues[k].real) or top <= 0.0:
        raise ConvergenceError(f"la descomposición densa no dio una raíz de Perron (orden {block.shape[0]})")
    return max(float(eigenvalues[k].real), 0.0), vector / top


def _power_iterate(block, cap):
    """Iteración de potencias sobre block + I; devuelve (ρ(block), v, iteraciones).

    Termina cuando la cota de Collatz-Wielandt low <= ρ + 1 <= high se cierra a
    ABSOLUTE_TOL. Si no se cierra en min(cap, POWER_BUDGET) pasos (autovalores
    casi iguales) se usa _dense_perron, que debe caer dentro de la última cota.
    """
    n = block.shape[0]
    shifted = block + np.eye(n)
    v = np.ones(n)
    low, high = 1.0, float("inf")
    budget = min(cap, POWER_BUDGET)
    for iteration in range(1, budget + 1):
        w = shifted @ v
        ratios = w / v
        low, high = float(ratios.min()), float(ratios.max())
        v = w / float(w.max())
        if high - low <= _bracket_tol(high):
            return 0.5 * (low + high) - 1.0, v, iteration
    rho, v = _dense_perron(block)
    slack = _bracket_tol(high) + DENSE_SLACK * (rho + 1.0)
    if not (low - slack <= rho + 1.0 <= high + slack):
        raise ConvergenceError(
            f"la iteración de potencias no convergió en {budget} iteraciones (orden {n}) "
            f"y la descomposición densa ({rho:.12g}) cae fuera de la cota [{low - 1.0:.12g}, {high - 1.0:.12g}]"
        )
    logger.info("power_iterate respaldo denso n=%s iters=%s ancho=%.3g rho=%.12g", n, budget, high - low, rho)
    return rho, v, budget


def spectral_radius(M, max_iters=None):
    """ρ(M) como máximo de los radios de las componentes fuertes no triviales."""
    cap = max_iterations(max_iters)
    rho = 0.0
    total_iterations = 0
    for component in strongly_connected_components(M):
        if component.trivial:
            continue
        members = list(component.members)
        block = M.values[np.ix_(members, members)]
        if len(members) == 1:
            value = float(block[0, 0])
        else:
            value, _, iterations = _power_iterate(block, cap)
            total_iterations += iterations
        rho = max(rho, value)
    logger.debug("spectral_radius fin n=%s rho=%.12g iters=%s", M.n, rho, total_iterations)
    return rho


def is_irreducible(M):
    if M.n == 1:
        return True
    return len(strongly_connected_components(M)) == 1


def perron_eigenvector(M, max_iters=None):
    """(ρ, v) con v > 0 y máximo 1, para M irreducible."""
    if not is_irreducible(M):
        raise NotIrreducibleError("la matriz es reducible; el vector de Perron no es único")
    if M.n == 1:
        return M[0, 0], np.ones(1)
    rho, v, _ = _power_iterate(M.values, max_iterations(max_iters))
    residual = float(np.max(np.abs(M.values @ v - rho * v)))
    if residual > RESIDUAL_TOL:
        raise ConvergenceError(f"residuo del vector de Perron {residual:.3g} por encima de {RESIDUAL_TOL}")
    return rho, v


def theta_extension(M, l, m, alpha, L, theta):
    """M_θ: la arista (l, m) de peso M_lm se divide en L directo y α a través de un vértice nuevo.

    El índice nuevo va primero: (0, m) = α, (l, m) = L, (l, 0) = θ.
    """
    row, col = M.position(l), M.position(m)
    if alpha < 0 or L < 0:
        raise MatrixError("alpha y L deben ser no negativos")
    if theta <= 0:
        raise MatrixError("theta debe ser positivo")
    entry = M[row, col]
    if abs(alpha + L - entry) > SPLIT_TOL * max(1.0, entry):
        raise MatrixError(f"alpha + L = {alpha + L} no coincide con M[{l}, {m}] = {entry}")
    n = M.n
    values = np.zeros((n + 1, n + 1))
    values[1:, 1:] = M.values
    values[1 + row, 1 + col] = L
    values[0, 1 + col] = alpha
    values[1 + row, 0] = theta
    return NonnegMatrix(values, indices=("theta",) + M.indices)


def signed_spectral_radius(A):
    """Máximo módulo de los autovalores de una matriz real cualquiera."""
    values = np.asarray(A, dtype=float)
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(values))))

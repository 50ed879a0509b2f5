"""
Transformaciones de retardos: de-retardar (líneas de retardo), quitar retardos
y desplazar un retardo un paso.
"""
import logging
from dataclasses import dataclass, replace

from netstab.services.expr import Var, simplify, substitute, variables
from netstab.services.errors import TransformError
from netstab.services.network import Node, TimeDelayedNetwork, max_delay_profile

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class StateIndex:
    """Coordenada base (depth=0) o línea de retardo (node, depth)."""

    node: str
    depth: int = 0

    @property
    def is_base(self):
        return self.depth == 0

    @property
    def label(self):
        return self.node if self.depth == 0 else f"{self.node}__d{self.depth}"

    @property
    def origin(self):
        return (self.node, self.depth)


@dataclass(frozen=True, order=True)
class SequenceIndex:
    """Coordenada (γ, position) de una cadena de la expansión, 2 <= position <= |γ|-1.

    Guarda x_{γ[0]} retrasado position-1 pasos.
    """

    sequence: tuple
    position: int

    @property
    def is_base(self):
        return False

    @property
    def label(self):
        return "g__" + "_".join(self.sequence) + f"__{self.position}"

    @property
    def origin(self):
        return (self.sequence[0], self.position - 1)


@dataclass(frozen=True)
class AugmentedNetwork:
    """Red sin retardos (T = 1) sobre una lista de índices con proyección al original."""

    network: TimeDelayedNetwork
    indices: tuple

    @property
    def labels(self):
        return tuple(index.label for index in self.indices)

    @property
    def projection(self):
        return {index: index.origin for index in self.indices}

    @property
    def base_nodes(self):
        return tuple(index.label for index in self.indices if index.is_base)

    @property
    def dimension(self):
        return len(self.indices)


def check_labels(indices, context):
    labels = [index.label for index in indices]
    if len(set(labels)) != len(labels):
        raise TransformError(f"{context}: colisión de nombres de coordenadas {labels}")


def dedelay(net):
    """Red aumentada 𝒩_H: nodos base más una línea por (nodo, profundidad)."""
    base = [StateIndex(node_id) for node_id in net.node_ids]
    if net.T == 1:
        return AugmentedNetwork(network=net, indices=tuple(base))

    profile = max_delay_profile(net)
    lines = [
        StateIndex(node_id, depth)
        for node_id in net.node_ids
        for depth in range(1, profile[node_id] + 1)
    ]
    indices = tuple(base + lines)
    check_labels(indices, "dedelay")

    def to_line(var):
        if var.delay == 0:
            return var
        return Var(StateIndex(var.node, var.delay).label)

    nodes = [Node(index.label, net.domain(index.node)) for index in indices]
    updates = [substitute(update, to_line) for update in net.updates]
    for index in lines:
        previous = StateIndex(index.node, index.depth - 1)
        updates.append(Var(previous.label))

    augmented = TimeDelayedNetwork(nodes=tuple(nodes), updates=tuple(updates), name=f"{net.name}_dedelayed")
    logger.info("dedelay fin name=%s T=%s dim=%s", net.name, net.T, len(indices))
    return AugmentedNetwork(network=augmented, indices=indices)


def undelay(net):
    """𝒰_H: toda referencia x_i[-τ] pasa a x_i; las cancelaciones se simplifican."""
    if net.T == 1:
        return net
    updates = tuple(simplify(substitute(update, lambda var: Var(var.node))) for update in net.updates)
    logger.info("undelay fin name=%s T=%s", net.name, net.T)
    return replace(net, updates=updates, name=f"{net.name}_undelayed")


def shift_delay(net, target, source, tau):
    """Reduce en uno el retardo con que `target` lee `source` a retardo `tau`."""
    if tau < 1:
        raise TransformError(f"tau debe ser positivo, llegó {tau}")
    update = net.update(target)
    if (source, tau) not in variables(update):
        raise TransformError(f"la regla de {target} no lee {source}[-{tau}]")

    def shift(var):
        if var.key == (source, tau):
            return Var(source, tau - 1)
        return var

    position = net.position(target)
    updates = list(net.updates)
    updates[position] = simplify(substitute(update, shift))
    logger.debug("shift_delay target=%s source=%s tau=%s", target, source, tau)
    return replace(net, updates=tuple(updates))

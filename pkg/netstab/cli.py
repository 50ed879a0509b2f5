"""
Punto de entrada programático del comando `netstab` y exportación DOT.

run(argv) ejecuta el comando de gestión como lo haría `manage.py netstab ...`
y devuelve el código de salida (0 éxito, 1 error de dominio, 2 error de uso).
"""
import logging

import graphviz

logger = logging.getLogger(__name__)

SET_STYLE = {"style": "filled", "fillcolor": "lightblue"}


def emit_dot(graph, structural_set=None, name="network"):
    """DOT del grafo de interacciones; los vértices de S van rellenos.

    Las aristas llevan su conjunto de retardos solo si algún retardo es > 0.
    """
    members = set(structural_set or ())
    labelled = any(delay > 0 for delays in graph.edges.values() for delay in delays)
    dot = graphviz.Digraph(name=name)
    for vertex in graph.vertices:
        dot.node(vertex, **(SET_STYLE if vertex in members else {}))
    for (source, target), delays in graph.edges.items():
        if labelled:
            dot.edge(source, target, label="{" + ",".join(str(d) for d in sorted(delays)) + "}")
        else:
            dot.edge(source, target)
    return dot.source


def run(argv, stdout=None, stderr=None):
    from netstab.management.commands.netstab import Command

    command = Command(stdout=stdout, stderr=stderr)
    try:
        command.run_from_argv(["manage.py", "netstab", *argv])
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    return 0

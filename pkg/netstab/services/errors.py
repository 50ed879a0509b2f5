"""
Errores de dominio del análisis de estabilidad.

Todas las excepciones heredan de NetstabError para que el comando de gestión y
la API puedan convertirlas en un código de salida 1 o en un HTTP 400 sin
distinguir el tipo concreto.
"""


class NetstabError(Exception):
    """Error base de netstab."""


class ExpressionSyntaxError(NetstabError):
    """Texto que no respeta la gramática de expresiones."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (posición {position})"
        super().__init__(message)


class UndeclaredIdentifierError(ExpressionSyntaxError):
    """Referencia a un nodo que no fue declarado."""


class EvaluationError(NetstabError):
    """División por cero, asignación faltante o valor no finito."""


class UnboundedIntervalError(EvaluationError):
    """Cota no finita porque la caja de evaluación no está acotada."""


class IntervalOverflowError(EvaluationError):
    """Cota no finita sobre una caja acotada (desbordamiento numérico)."""


class NetworkDefinitionError(NetstabError):
    """Declaraciones o reglas de red inválidas."""


class TransformError(NetstabError):
    """Transformación no aplicable a la red o al conjunto dado."""


class StructuralSetError(NetstabError):
    """Conjunto de vértices inválido para el grafo de interacciones."""


class ConvergenceError(NetstabError):
    """Iteración sin convergencia dentro del tope configurado."""


class NotIrreducibleError(NetstabError):
    """Se pidió el vector de Perron de una matriz reducible."""


class DivergenceError(NetstabError):
    """La órbita produjo un valor no finito."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (paso {step})"
        super().__init__(message)


class MatrixError(NetstabError, ValueError):
    """Matriz no negativa inválida o división de arista fuera de rango."""


class UnknownIndexError(NetstabError, KeyError):
    """Índice que no pertenece a la matriz."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""

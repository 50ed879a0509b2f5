"""
Expresiones de las reglas de actualización.

Un árbol inmutable (Const, Var, Unary, Binary) con:
- parser de la gramática de la DSL (precedencia estándar, asociatividad por izquierda),
- derivación simbólica respecto de una variable retardada (nodo, retardo),
- evaluación puntual en flotantes y vectorizada con numpy,
- evaluación por intervalos con redondeo hacia afuera (1 ulp por operación).

El vocabulario de funciones es cerrado: tanh, sech, exp, sin, cos, abs. La
función sign sólo aparece en derivadas de abs y no es parte de la gramática.
"""
import logging
import math
import re
from dataclasses import dataclass
from functools import singledispatch
from typing import Callable, Iterable, Mapping, Union

import numpy as np

from netstab.services.errors import (
    EvaluationError,
    ExpressionSyntaxError,
    IntervalOverflowError,
    UnboundedIntervalError,
    UndeclaredIdentifierError,
)

logger = logging.getLogger(__name__)

UNARY_FUNCTIONS = ("tanh", "sech", "exp", "sin", "cos", "abs")
INTERNAL_FUNCTIONS = ("sign",)
BINARY_SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Const:
    value: float

    def __post_init__(self):
        value = float(self.value)
        if not math.isfinite(value):
            raise EvaluationError(f"constante no finita: {self.value}")
        object.__setattr__(self, "value", value)


@dataclass(frozen=True)
class Var:
    """Referencia a x_node retardada `delay` pasos (0 = estado actual)."""

    node: str
    delay: int = 0

    def __post_init__(self):
        if isinstance(self.delay, bool) or not isinstance(self.delay, int) or self.delay < 0:
            raise EvaluationError(f"retardo inválido para {self.node}: {self.delay!r}")

    @property
    def key(self):
        return (self.node, self.delay)


@dataclass(frozen=True)
class Unary:
    func: str
    arg: "Expr"

    def __post_init__(self):
        if self.func != "neg" and self.func not in UNARY_FUNCTIONS + INTERNAL_FUNCTIONS:
            raise EvaluationError(f"función desconocida: {self.func}")


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in BINARY_SYMBOLS:
            raise EvaluationError(f"operador desconocido: {self.op}")


Expr = Union[Const, Var, Unary, Binary]
VarKey = tuple  # (node_id, delay)

ZERO = Const(0.0)
ONE = Const(1.0)


def format_var(node, delay):
    return node if delay == 0 else f"{node}[-{delay}]"


# ---------------------------------------------------------------------------
# Intervalos
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or lo > hi or lo == math.inf or hi == -math.inf:
            raise EvaluationError(f"intervalo inválido [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, value):
        return cls(value, value)

    @classmethod
    def real_line(cls):
        return cls(-math.inf, math.inf)

    @property
    def is_bounded(self):
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, value):
        return self.lo <= value <= self.hi

    def abs_sup(self):
        return max(abs(self.lo), abs(self.hi))

    def __str__(self):
        return f"[{format_bound(self.lo)},{format_bound(self.hi)}]"


def format_bound(value):
    if value == math.inf:
        return "inf"
    if value == -math.inf:
        return "-inf"
    return repr(float(value))


def _outward(lo, hi, floor=-math.inf, ceil=math.inf):
    if math.isfinite(lo):
        lo = math.nextafter(lo, -math.inf)
    if math.isfinite(hi):
        hi = math.nextafter(hi, math.inf)
    return Interval(max(lo, floor), min(hi, ceil))


def _endpoint_product(a, b):
    # 0 * inf = 0: el extremo nulo es un valor exacto del intervalo
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def interval_add(a, b):
    return _outward(a.lo + b.lo, a.hi + b.hi)


def interval_sub(a, b):
    return _outward(a.lo - b.hi, a.hi - b.lo)


def interval_mul(a, b):
    products = [
        _endpoint_product(a.lo, b.lo),
        _endpoint_product(a.lo, b.hi),
        _endpoint_product(a.hi, b.lo),
        _endpoint_product(a.hi, b.hi),
    ]
    return _outward(min(products), max(products))


def interval_div(a, b):
    if b.lo <= 0.0 <= b.hi:
        raise EvaluationError(f"el denominador puede anularse en {b}")
    reciprocal = _outward(1.0 / b.hi, 1.0 / b.lo)
    return interval_mul(a, reciprocal)


def interval_neg(a):
    return Interval(-a.hi, -a.lo)


def _safe_exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _sech(x):
    if abs(x) > 710.0:
        return 0.0
    return 1.0 / math.cosh(x)


def _sign(x):
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


def _hits_phase(lo, hi, phase):
    """¿Existe k entero con phase + 2πk en [lo, hi]?"""
    k = math.ceil((lo - phase) / TWO_PI)
    return phase + k * TWO_PI <= hi


def _periodic_interval(a, fn, peak_phase, trough_phase):
    if not a.is_bounded or a.hi - a.lo >= TWO_PI:
        return Interval(-1.0, 1.0)
    left, right = fn(a.lo), fn(a.hi)
    lo, hi = min(left, right), max(left, right)
    if _hits_phase(a.lo, a.hi, peak_phase):
        hi = 1.0
    if _hits_phase(a.lo, a.hi, trough_phase):
        lo = -1.0
    return _outward(lo, hi, -1.0, 1.0)


def _tanh_interval(a):
    return _outward(math.tanh(a.lo), math.tanh(a.hi), -1.0, 1.0)


def _sech_interval(a):
    if a.lo <= 0.0 <= a.hi:
        return _outward(min(_sech(a.lo), _sech(a.hi)), 1.0, 0.0, 1.0)
    if a.lo > 0.0:
        return _outward(_sech(a.hi), _sech(a.lo), 0.0, 1.0)
    return _outward(_sech(a.lo), _sech(a.hi), 0.0, 1.0)


def _exp_interval(a):
    return _outward(_safe_exp(a.lo), _safe_exp(a.hi), 0.0)


def _abs_interval(a):
    if a.lo >= 0.0:
        return a
    if a.hi <= 0.0:
        return interval_neg(a)
    return Interval(0.0, max(-a.lo, a.hi))


def _sign_interval(a):
    return Interval(_sign(a.lo), _sign(a.hi))


_INTERVAL_FUNCTIONS = {
    "neg": interval_neg,
    "tanh": _tanh_interval,
    "sech": _sech_interval,
    "exp": _exp_interval,
    "sin": lambda a: _periodic_interval(a, math.sin, math.pi / 2, -math.pi / 2),
    "cos": lambda a: _periodic_interval(a, math.cos, 0.0, math.pi),
    "abs": _abs_interval,
    "sign": _sign_interval,
}

_POINT_FUNCTIONS = {
    "neg": lambda x: -x,
    "tanh": math.tanh,
    "sech": _sech,
    "exp": _safe_exp,
    "sin": math.sin,
    "cos": math.cos,
    "abs": abs,
    "sign": _sign,
}

_ARRAY_FUNCTIONS = {
    "neg": np.negative,
    "tanh": np.tanh,
    "sech": lambda x: 1.0 / np.cosh(x),
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
    "sign": np.sign,
}


# ---------------------------------------------------------------------------
# Recorridos y constructores con plegado de constantes
# ---------------------------------------------------------------------------


def walk(e):
    """Recorre todos los nodos del árbol (preorden)."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Binary):
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, Unary):
            stack.append(node.arg)


def variables(e):
    """Conjunto de pares (nodo, retardo) referenciados por la expresión."""
    return frozenset(node.key for node in walk(e) if isinstance(node, Var))


def max_delay(e):
    return max((delay for _, delay in variables(e)), default=0)


def substitute(e, replace: Callable[[Var], "Expr"]):
    """Reemplaza cada Var por replace(var) sin simplificar el resultado."""
    if isinstance(e, Var):
        return replace(e)
    if isinstance(e, Unary):
        arg = substitute(e.arg, replace)
        return e if arg is e.arg else Unary(e.func, arg)
    if isinstance(e, Binary):
        left = substitute(e.left, replace)
        right = substitute(e.right, replace)
        if left is e.left and right is e.right:
            return e
        return Binary(e.op, left, right)
    return e


def _is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


def _folded(value, fallback):
    if math.isfinite(value):
        return Const(value)
    return fallback()


def add(a, b):
    if _is_const(a) and _is_const(b):
        return _folded(a.value + b.value, lambda: Binary("add", a, b))
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("add", a, b)


def sub(a, b):
    if _is_const(a) and _is_const(b):
        return _folded(a.value - b.value, lambda: Binary("sub", a, b))
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if a == b:
        return ZERO
    return Binary("sub", a, b)


def mul(a, b):
    if _is_const(a) and _is_const(b):
        return _folded(a.value * b.value, lambda: Binary("mul", a, b))
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Binary("mul", a, b)


def div(a, b):
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return _folded(a.value / b.value, lambda: Binary("div", a, b))
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Binary("div", a, b)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.func == "neg":
        return a.arg
    return Unary("neg", a)


def apply(func, a):
    if func == "neg":
        return neg(a)
    if isinstance(a, Const):
        try:
            value = _POINT_FUNCTIONS[func](a.value)
        except (ValueError, OverflowError):
            return Unary(func, a)
        return _folded(value, lambda: Unary(func, a))
    return Unary(func, a)


_BUILDERS = {"add": add, "sub": sub, "mul": mul, "div": div}


def combine(op, a, b):
    return _BUILDERS[op](a, b)


def signed_terms(e, sign=1):
    """Aplana una cadena de sumas y restas en pares (signo, término)."""
    if isinstance(e, Binary) and e.op == "add":
        return signed_terms(e.left, sign) + signed_terms(e.right, sign)
    if isinstance(e, Binary) and e.op == "sub":
        return signed_terms(e.left, sign) + signed_terms(e.right, -sign)
    return [(sign, e)]


def rebuild_sum(terms):
    result = None
    for sign, term in terms:
        if result is None:
            result = term if sign > 0 else neg(term)
        elif sign > 0:
            result = add(result, term)
        else:
            result = sub(result, term)
    return ZERO if result is None else result


def cancel_pairs(terms):
    """Elimina pares (+t, -t) con t estructuralmente igual; devuelve (restantes, hubo_cancelación)."""
    remaining = list(terms)
    cancelled = False
    i = 0
    while i < len(remaining):
        sign, term = remaining[i]
        partner = next(
            (k for k in range(i + 1, len(remaining)) if remaining[k][0] == -sign and remaining[k][1] == term),
            None,
        )
        if partner is None:
            i += 1
            continue
        del remaining[partner]
        del remaining[i]
        cancelled = True
    return remaining, cancelled


def _cancel_terms(e):
    remaining, cancelled = cancel_pairs(signed_terms(e))
    if not cancelled:
        return e
    return rebuild_sum(remaining)


@singledispatch
def simplify(e):
    """Pliega constantes, elimina términos multiplicados por 0 y cancela t - t."""
    return e


@simplify.register
def _(e: Unary):
    return apply(e.func, simplify(e.arg))


@simplify.register
def _(e: Binary):
    combined = combine(e.op, simplify(e.left), simplify(e.right))
    if isinstance(combined, Binary) and combined.op in ("add", "sub"):
        return _cancel_terms(combined)
    return combined


# ---------------------------------------------------------------------------
# Derivación
# ---------------------------------------------------------------------------


@singledispatch
def _derivative(e, wrt):
    raise EvaluationError(f"nodo de expresión desconocido: {e!r}")


@_derivative.register
def _(e: Const, wrt):
    return ZERO


@_derivative.register
def _(e: Var, wrt):
    return ONE if e.key == wrt else ZERO


@_derivative.register
def _(e: Unary, wrt):
    du = _derivative(e.arg, wrt)
    if _is_const(du, 0.0):
        return ZERO
    u = e.arg
    if e.func == "neg":
        return neg(du)
    if e.func == "tanh":
        return mul(du, mul(Unary("sech", u), Unary("sech", u)))
    if e.func == "sech":
        return mul(du, neg(mul(Unary("sech", u), Unary("tanh", u))))
    if e.func == "exp":
        return mul(du, Unary("exp", u))
    if e.func == "sin":
        return mul(du, Unary("cos", u))
    if e.func == "cos":
        return mul(du, neg(Unary("sin", u)))
    if e.func == "abs":
        return mul(du, Unary("sign", u))
    # sign: derivada nula en casi todo punto
    return ZERO


@_derivative.register
def _(e: Binary, wrt):
    du = _derivative(e.left, wrt)
    dv = _derivative(e.right, wrt)
    u, v = e.left, e.right
    if e.op == "add":
        return add(du, dv)
    if e.op == "sub":
        return sub(du, dv)
    if e.op == "mul":
        return add(mul(du, v), mul(u, dv))
    if _is_const(dv, 0.0):
        return div(du, v)
    return div(sub(mul(du, v), mul(u, dv)), mul(v, v))


def differentiate(e, wrt):
    """Derivada parcial exacta de e respecto de la variable wrt = (nodo, retardo)."""
    return _derivative(simplify(e), tuple(wrt))


# ---------------------------------------------------------------------------
# Evaluación
# ---------------------------------------------------------------------------


@singledispatch
def _point(e, assignment):
    raise EvaluationError(f"nodo de expresión desconocido: {e!r}")


@_point.register
def _(e: Const, assignment):
    return e.value


@_point.register
def _(e: Var, assignment):
    try:
        return float(assignment[e.key])
    except KeyError:
        raise EvaluationError(f"falta asignación para {format_var(e.node, e.delay)}") from None


@_point.register
def _(e: Unary, assignment):
    value = _point(e.arg, assignment)
    try:
        return _POINT_FUNCTIONS[e.func](value)
    except ValueError:
        # sin/cos de un valor infinito
        return math.nan


@_point.register
def _(e: Binary, assignment):
    left = _point(e.left, assignment)
    right = _point(e.right, assignment)
    if e.op == "add":
        return left + right
    if e.op == "sub":
        return left - right
    if e.op == "mul":
        return left * right
    if right == 0.0:
        raise EvaluationError(f"división por cero en {to_text(e)}")
    return left / right


def eval_point(e, assignment: Mapping):
    """Evalúa e en flotantes; assignment mapea (nodo, retardo) a real."""
    return _point(e, assignment)


@singledispatch
def _array(e, lookup):
    raise EvaluationError(f"nodo de expresión desconocido: {e!r}")


@_array.register
def _(e: Const, lookup):
    return e.value


@_array.register
def _(e: Var, lookup):
    return lookup(e.node, e.delay)


@_array.register
def _(e: Unary, lookup):
    return _ARRAY_FUNCTIONS[e.func](_array(e.arg, lookup))


@_array.register
def _(e: Binary, lookup):
    left = _array(e.left, lookup)
    right = _array(e.right, lookup)
    if e.op == "add":
        return left + right
    if e.op == "sub":
        return left - right
    if e.op == "mul":
        return left * right
    return left / right


def eval_array(e, lookup: Callable[[str, int], np.ndarray]):
    """Evaluación vectorizada: lookup(nodo, retardo) devuelve un arreglo de numpy.

    Los valores no finitos se propagan; el llamador decide qué hacer con ellos.
    """
    return np.asarray(_array(e, lookup), dtype=float)


@singledispatch
def _interval(e, box):
    raise EvaluationError(f"nodo de expresión desconocido: {e!r}")


@_interval.register
def _(e: Const, box):
    return Interval.point(e.value)


@_interval.register
def _(e: Var, box):
    try:
        return box[e.key]
    except KeyError:
        raise EvaluationError(f"la caja no cubre {format_var(e.node, e.delay)}") from None


@_interval.register
def _(e: Unary, box):
    return _INTERVAL_FUNCTIONS[e.func](_interval(e.arg, box))


@_interval.register
def _(e: Binary, box):
    left = _interval(e.left, box)
    right = _interval(e.right, box)
    if e.op == "add":
        return interval_add(left, right)
    if e.op == "sub":
        return interval_sub(left, right)
    if e.op == "mul":
        return interval_mul(left, right)
    if right.lo <= 0.0 <= right.hi:
        raise EvaluationError(f"el denominador {to_text(e.right)} puede anularse en {right}")
    return interval_div(left, right)


def eval_interval(e, box: Mapping, require_finite=False):
    """Intervalo que contiene e(x) para todo x de la caja.

    Con require_finite=True una cota infinita es un error: UnboundedIntervalError
    si alguna variable recorre un dominio no acotado, IntervalOverflowError si no.
    """
    result = _interval(e, box)
    if require_finite and not result.is_bounded:
        if all(box[key].is_bounded for key in variables(e)):
            raise IntervalOverflowError(f"desbordamiento al acotar {to_text(e)}")
        raise UnboundedIntervalError(f"cota no acotada para {to_text(e)} sobre un dominio no acotado")
    return result


# ---------------------------------------------------------------------------
# Texto: parser e impresión
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/()\[\]])"
)
_INTEGER_RE = re.compile(r"\d+")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    position: int


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ExpressionSyntaxError(f"carácter inesperado {text[pos]!r}", pos)
        tokens.append(_Token(match.lastgroup, match.group(), pos))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, declared, allow_internal):
        self.tokens = _tokenize(text)
        self.index = 0
        self.declared = frozenset(declared)
        self.functions = UNARY_FUNCTIONS + (INTERNAL_FUNCTIONS if allow_internal else ())

    @property
    def current(self):
        return self.tokens[self.index]

    def advance(self):
        token = self.tokens[self.index]
        self.index += 1
        return token

    def accept(self, text):
        if self.current.kind == "op" and self.current.text == text:
            return self.advance()
        return None

    def expect(self, text):
        token = self.accept(text)
        if token is None:
            found = self.current.text or "fin de texto"
            raise ExpressionSyntaxError(f"se esperaba {text!r} y se encontró {found!r}", self.current.position)
        return token

    def expression(self):
        node = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = "add" if self.advance().text == "+" else "sub"
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.current.kind == "op" and self.current.text in "*/":
            op = "mul" if self.advance().text == "*" else "div"
            node = Binary(op, node, self.factor())
        return node

    def factor(self):
        if self.accept("-"):
            if self.current.kind == "number":
                return Const(-float(self.advance().text))
            return Unary("neg", self.atom())
        return self.atom()

    def atom(self):
        token = self.current
        if token.kind == "number":
            self.advance()
            return Const(float(token.text))
        if token.kind == "ident":
            self.advance()
            if token.text in UNARY_FUNCTIONS + INTERNAL_FUNCTIONS:
                if token.text not in self.functions:
                    raise ExpressionSyntaxError(f"función no permitida {token.text!r}", token.position)
                self.expect("(")
                arg = self.expression()
                self.expect(")")
                return Unary(token.text, arg)
            if token.text not in self.declared:
                raise UndeclaredIdentifierError(f"identificador no declarado {token.text!r}", token.position)
            return Var(token.text, self.delay())
        if self.accept("("):
            node = self.expression()
            self.expect(")")
            return node
        found = token.text or "fin de texto"
        raise ExpressionSyntaxError(f"se esperaba un operando y se encontró {found!r}", token.position)

    def delay(self):
        if not self.accept("["):
            return 0
        minus = self.accept("-")
        token = self.current
        if minus is None:
            raise ExpressionSyntaxError("literal de retardo inválido: se escribe [-k] con k >= 0", token.position)
        if token.kind != "number" or not _INTEGER_RE.fullmatch(token.text):
            raise ExpressionSyntaxError("literal de retardo inválido: se esperaba un entero", token.position)
        self.advance()
        self.expect("]")
        return int(token.text)

    def expect_end(self):
        if self.current.kind != "end":
            raise ExpressionSyntaxError(f"texto sobrante {self.current.text!r}", self.current.position)


def parse_expression(text, declared_nodes: Iterable[str], allow_internal=False):
    """Devuelve el árbol único del texto según la gramática de la DSL."""
    parser = _Parser(text, declared_nodes, allow_internal)
    node = parser.expression()
    parser.expect_end()
    return node


_PRECEDENCE = {"add": 1, "sub": 1, "mul": 2, "div": 2}


def _precedence(e):
    if isinstance(e, Binary):
        return _PRECEDENCE[e.op]
    if isinstance(e, Unary) and e.func == "neg":
        return 3
    if isinstance(e, Const) and math.copysign(1.0, e.value) < 0:
        return 3
    return 4


def format_number(value):
    return repr(float(value))


@singledispatch
def to_text(e):
    """Texto que vuelve a parsearse al mismo árbol."""
    raise EvaluationError(f"nodo de expresión desconocido: {e!r}")


@to_text.register
def _(e: Const):
    return format_number(e.value)


@to_text.register
def _(e: Var):
    return format_var(e.node, e.delay)


@to_text.register
def _(e: Unary):
    inner = to_text(e.arg)
    if e.func != "neg":
        return f"{e.func}({inner})"
    if isinstance(e.arg, Var) or (isinstance(e.arg, Unary) and e.arg.func != "neg"):
        return f"-{inner}"
    return f"-({inner})"


@to_text.register
def _(e: Binary):
    level = _PRECEDENCE[e.op]
    left = to_text(e.left)
    right = to_text(e.right)
    if _precedence(e.left) < level:
        left = f"({left})"
    if _precedence(e.right) <= level:
        right = f"({right})"
    return f"{left} {BINARY_SYMBOLS[e.op]} {right}"

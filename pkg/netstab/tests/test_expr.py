"""
Tests del árbol de expresiones: parser, impresión, derivadas y evaluación por intervalos.
"""
import math

import numpy as np
from django.test import SimpleTestCase

from netstab.services.errors import (
    EvaluationError,
    ExpressionSyntaxError,
    IntervalOverflowError,
    UnboundedIntervalError,
    UndeclaredIdentifierError,
)
from netstab.services.expr import (
    ZERO,
    Binary,
    Const,
    Interval,
    Unary,
    Var,
    differentiate,
    eval_array,
    eval_interval,
    eval_point,
    parse_expression,
    simplify,
    to_text,
    variables,
    walk,
)
from netstab.tests.factories import random_rules

NODES = ("x", "y", "z")


def parse(text, nodes=NODES):
    return parse_expression(text, nodes)


def tree_depth(e):
    if isinstance(e, Unary):
        return 1 + tree_depth(e.arg)
    if isinstance(e, Binary):
        return 1 + max(tree_depth(e.left), tree_depth(e.right))
    return 0


class RandomTrees:
    """Árboles aleatorios de profundidad >= 4 con |valor| <= 2 en la caja [-1.5, 2].

    Cada nodo interno reescala su resultado para no salir de esa cota y los
    denominadores son 2 + (sin|cos|tanh)(...), así que nunca se anulan.
    """

    UNARY = ("tanh", "sech", "exp", "sin", "cos", "abs")
    BINARY = ("add", "sub", "mul", "div")
    KEYS = tuple((node, delay) for node in NODES for delay in range(3))

    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)

    def leaf(self):
        if self.rng.random() < 0.3:
            return Const(round(float(self.rng.uniform(-2.0, 2.0)), 3))
        node, delay = self.KEYS[int(self.rng.integers(len(self.KEYS)))]
        return Var(node, delay)

    def unary(self, func, arg):
        if func == "exp":
            return Unary("exp", Binary("mul", Const(0.25), arg))
        return Unary(func, arg)

    def binary(self, op, left, right):
        if op == "div":
            squash = ("sin", "cos", "tanh")[int(self.rng.integers(3))]
            return Binary("div", left, Binary("add", Const(2.0), Unary(squash, right)))
        return Binary("mul", Const(0.5), Binary(op, left, right))

    def tree(self, depth):
        if depth == 0:
            return self.leaf()
        if self.rng.random() < 0.4:
            func = self.UNARY[int(self.rng.integers(len(self.UNARY)))]
            return self.unary(func, self.tree(depth - 1))
        op = self.BINARY[int(self.rng.integers(len(self.BINARY)))]
        other = self.tree(int(self.rng.integers(0, depth)))
        if self.rng.random() < 0.5:
            return self.binary(op, self.tree(depth - 1), other)
        return self.binary(op, other, self.tree(depth - 1))

    def trees(self, count, min_depth=4, max_depth=6):
        return [self.tree(int(self.rng.integers(min_depth, max_depth + 1))) for _ in range(count)]

    def box(self, tree):
        box = {}
        for key in variables(tree):
            lo = float(self.rng.uniform(-1.5, 0.5))
            box[key] = Interval(lo, lo + float(self.rng.uniform(0.0, 1.5)))
        return box

    def point(self, box):
        return {key: float(self.rng.uniform(interval.lo, interval.hi)) for key, interval in box.items()}


class ParserTests(SimpleTestCase):
    """Gramática: precedencia, asociatividad, retardos y errores con posición."""

    def test_multiplication_binds_tighter_than_addition(self):
        self.assertEqual(
            parse("x + y * z"),
            Binary("add", Var("x"), Binary("mul", Var("y"), Var("z"))),
        )

    def test_subtraction_is_left_associative(self):
        self.assertEqual(
            parse("x - y - z"),
            Binary("sub", Binary("sub", Var("x"), Var("y")), Var("z")),
        )

    def test_delay_literal(self):
        self.assertEqual(parse("tanh(x[-3])"), Unary("tanh", Var("x", 3)))
        self.assertEqual(parse("x[-0]"), Var("x"))

    def test_negative_number_is_folded_into_constant(self):
        self.assertEqual(parse("-2*x"), Binary("mul", Const(-2.0), Var("x")))
        self.assertEqual(parse("-x"), Unary("neg", Var("x")))

    def test_undeclared_identifier_reports_position(self):
        with self.assertRaises(UndeclaredIdentifierError) as ctx:
            parse_expression("x + w", ["x"])
        self.assertEqual(ctx.exception.position, 4)
        self.assertIn("w", str(ctx.exception))

    def test_malformed_text_raises_syntax_error(self):
        for text in ("x +", "tanh(x", "x[3]", "x[-1.5]", "x y", "sign(x)", "log(x)", "2 $ x"):
            with self.subTest(text=text), self.assertRaises(ExpressionSyntaxError):
                parse(text)

    def test_sign_is_only_parsed_when_internal_functions_are_allowed(self):
        self.assertEqual(parse_expression("sign(x)", NODES, allow_internal=True), Unary("sign", Var("x")))

    def test_to_text_round_trips(self):
        texts = [
            "x - (y - z)",
            "x / (y * z)",
            "-(x + y) * z",
            "x - -0.5 * y",
            "-(-x)",
            "tanh(2.0 * x[-1]) + sech(y) - exp(-z)",
            "abs(sin(x) / cos(y))",
            "x * -3.0",
        ]
        for text in texts:
            with self.subTest(text=text):
                tree = parse(text)
                self.assertEqual(parse(to_text(tree)), tree)

    def test_random_rules_round_trip(self):
        rng = np.random.default_rng(7)
        nodes = [f"x{k}" for k in range(1, 6)]
        texts = [text for _ in range(4) for _, text in random_rules(rng, nodes, max_delay=2)]
        for text in texts:
            tree = parse_expression(text, nodes)
            self.assertEqual(parse_expression(to_text(tree), nodes), tree)


class SimplifyTests(SimpleTestCase):
    def test_constant_folding(self):
        self.assertEqual(simplify(parse("2 * 3 + 1")), Const(7.0))

    def test_zero_and_one_are_absorbed(self):
        self.assertEqual(simplify(parse("0 * y + 1 * x")), Var("x"))

    def test_equal_terms_cancel(self):
        self.assertEqual(simplify(parse("tanh(x) + y - tanh(x)")), Var("y"))
        self.assertEqual(simplify(parse("x - x")), ZERO)

    def test_terms_with_different_delays_do_not_cancel(self):
        tree = simplify(parse("tanh(x) - tanh(x[-1])"))
        self.assertEqual(variables(tree), {("x", 0), ("x", 1)})


class DifferentiateTests(SimpleTestCase):
    """Derivadas simbólicas contra diferencias finitas centradas."""

    def _finite_difference(self, tree, key, assignment, h=1e-6):
        up = dict(assignment)
        down = dict(assignment)
        up[key] += h
        down[key] -= h
        return (eval_point(tree, up) - eval_point(tree, down)) / (2 * h)

    def test_tanh_chain_rule(self):
        tree = parse("tanh(2*x)")
        value = eval_point(differentiate(tree, ("x", 0)), {("x", 0): 0.3})
        self.assertAlmostEqual(value, 2.0 / math.cosh(0.6) ** 2, places=12)

    def test_derivative_respects_delays(self):
        tree = parse("x + 2*x[-1]")
        self.assertEqual(differentiate(tree, ("x", 1)), Const(2.0))
        self.assertEqual(differentiate(tree, ("x", 0)), Const(1.0))
        self.assertEqual(differentiate(tree, ("y", 0)), ZERO)

    def test_quotient_rule(self):
        tree = parse("x / y")
        derivative = differentiate(tree, ("y", 0))
        self.assertAlmostEqual(eval_point(derivative, {("x", 0): 3.0, ("y", 0): 2.0}), -0.75)

    def test_matches_finite_differences_on_random_rules(self):
        rng = np.random.default_rng(11)
        nodes = [f"x{k}" for k in range(1, 5)]
        texts = [text for _ in range(5) for _, text in random_rules(rng, nodes, max_delay=1)]
        for text in texts:
            tree = parse_expression(text, nodes)
            assignment = {key: float(rng.uniform(-2, 2)) for key in variables(tree)}
            for key in variables(tree):
                exact = eval_point(differentiate(tree, key), assignment)
                approx = self._finite_difference(tree, key, assignment)
                self.assertAlmostEqual(exact, approx, delta=1e-5 * max(1.0, abs(exact)))

    def test_random_trees_match_central_differences(self):
        generator = RandomTrees(seed=17)
        for k, tree in enumerate(generator.trees(1000)):
            assignment = generator.point(generator.box(tree))
            for key in variables(tree):
                exact = eval_point(differentiate(tree, key), assignment)
                approx = self._finite_difference(tree, key, assignment, h=1e-5)
                with self.subTest(case=k, key=key):
                    self.assertAlmostEqual(exact, approx, delta=1e-6 * (1.0 + abs(exact)))

    def test_abs_and_trig_derivatives(self):
        tree = parse("abs(x) + sin(y) * cos(z) + exp(x) / sech(y)")
        assignment = {("x", 0): -0.7, ("y", 0): 0.4, ("z", 0): 1.1}
        for key in variables(tree):
            exact = eval_point(differentiate(tree, key), assignment)
            self.assertAlmostEqual(exact, self._finite_difference(tree, key, assignment), places=6)


class EvaluationTests(SimpleTestCase):
    def test_division_by_zero(self):
        with self.assertRaises(EvaluationError):
            eval_point(parse("x / y"), {("x", 0): 1.0, ("y", 0): 0.0})

    def test_missing_assignment(self):
        with self.assertRaises(EvaluationError):
            eval_point(parse("x + y"), {("x", 0): 1.0})

    def test_eval_array_matches_eval_point(self):
        tree = parse("0.3*tanh(x) - sin(y[-1]) + 2")
        xs = np.linspace(-1, 1, 5)
        ys = np.linspace(2, 3, 5)
        values = eval_array(tree, lambda node, delay: xs if node == "x" else ys)
        for k in range(5):
            expected = eval_point(tree, {("x", 0): xs[k], ("y", 1): ys[k]})
            self.assertAlmostEqual(values[k], expected, places=14)


class IntervalTests(SimpleTestCase):
    """Evaluación por intervalos: contención y errores de cotas infinitas."""

    def test_tanh_derivative_is_bounded_by_one_on_the_real_line(self):
        derivative = differentiate(parse("tanh(x)"), ("x", 0))
        bound = eval_interval(derivative, {("x", 0): Interval.real_line()}, require_finite=True)
        self.assertAlmostEqual(bound.abs_sup(), 1.0, places=12)
        self.assertGreaterEqual(bound.abs_sup(), 1.0)

    def test_sine_reaches_its_peak_inside_the_box(self):
        result = eval_interval(parse("sin(x)"), {("x", 0): Interval(0.0, math.pi)})
        self.assertEqual(result.hi, 1.0)
        self.assertLessEqual(result.lo, 0.0)

    def test_unbounded_domain_is_reported(self):
        with self.assertRaises(UnboundedIntervalError):
            eval_interval(parse("x"), {("x", 0): Interval.real_line()}, require_finite=True)

    def test_overflow_on_bounded_box_is_distinct(self):
        with self.assertRaises(IntervalOverflowError):
            eval_interval(parse("exp(x)"), {("x", 0): Interval(0.0, 1000.0)}, require_finite=True)

    def test_denominator_containing_zero(self):
        with self.assertRaises(EvaluationError):
            eval_interval(parse("1 / x"), {("x", 0): Interval(-1.0, 1.0)})

    def test_random_points_fall_inside_the_enclosure(self):
        rng = np.random.default_rng(3)
        nodes = [f"x{k}" for k in range(1, 5)]
        box_width = 2.5
        texts = [text for _ in range(5) for _, text in random_rules(rng, nodes, max_delay=1)]
        for text in texts:
            tree = parse_expression(text, nodes)
            box = {key: Interval(-box_width, box_width) for key in variables(tree)}
            enclosure = eval_interval(tree, box)
            for _ in range(50):
                assignment = {key: float(rng.uniform(-box_width, box_width)) for key in box}
                value = eval_point(tree, assignment)
                self.assertTrue(enclosure.lo <= value <= enclosure.hi, f"{value} fuera de {enclosure} para {text}")

    def test_random_trees_enclose_sampled_points(self):
        generator = RandomTrees(seed=19)
        for k, tree in enumerate(generator.trees(1000)):
            box = generator.box(tree)
            enclosure = eval_interval(tree, box)
            for _ in range(20):
                value = eval_point(tree, generator.point(box))
                slack = 1e-12 * (1.0 + abs(value))
                with self.subTest(case=k):
                    self.assertTrue(
                        enclosure.lo - slack <= value <= enclosure.hi + slack,
                        f"{value} fuera de {enclosure} para {to_text(tree)}",
                    )


class RandomTreeCoverageTests(SimpleTestCase):
    def test_every_function_and_operator_appears_at_depth_four_or_more(self):
        trees = RandomTrees(seed=17).trees(1000)
        self.assertGreaterEqual(min(tree_depth(tree) for tree in trees), 4)
        funcs = {node.func for tree in trees for node in walk(tree) if isinstance(node, Unary)}
        ops = {node.op for tree in trees for node in walk(tree) if isinstance(node, Binary)}
        self.assertLessEqual(set(RandomTrees.UNARY), funcs)
        self.assertLessEqual(set(RandomTrees.BINARY), ops)
        nested = [
            node
            for tree in trees
            for node in walk(tree)
            if isinstance(node, Binary) and node.op == "mul" and isinstance(node.right, Binary) and node.right.op == "mul"
        ]
        self.assertTrue(nested)

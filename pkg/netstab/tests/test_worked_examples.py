"""
Regresiones de los ejemplos con forma cerrada.
"""
import math

from django.test import SimpleTestCase

from netstab.services.worked_examples import (
    EXAMPLE_6_SET,
    RegressionCheck,
    even_vertices,
    example_3,
    example_5,
    example_6,
    example_7,
    iter_regressions,
    restriction_identity_holds,
    run_regressions,
    sech,
    stability_threshold,
)
from netstab.services.stability import analyze, local_spectral_radius
from netstab.services.transform import expand, restrict

CRITICAL_C = 2.0 + math.acosh(2.0)


def expansion_rho(c):
    net = example_5(2, c)
    return analyze(expand(net, even_vertices(net))).rho


class ClosedFormTests(SimpleTestCase):
    """Valores cerrados de los ejemplos 3, 5 y 7."""

    def test_example_3_repelling_point(self):
        self.assertAlmostEqual(local_spectral_radius(example_3(), [0.0, 0.0]), (1 + math.sqrt(17)) / 4, delta=1e-9)

    def test_example_5_expansion_radius(self):
        for c in (2.0, 3.0, 4.0):
            with self.subTest(c=c):
                self.assertAlmostEqual(expansion_rho(c), 2.0 * sech(c - 2.0), delta=1e-8)

    def test_example_5_threshold(self):
        self.assertAlmostEqual(stability_threshold(expansion_rho, 2.0, 6.0), CRITICAL_C, delta=1e-3)

    def test_threshold_needs_a_bracket(self):
        with self.assertRaises(ValueError):
            stability_threshold(expansion_rho, 4.0, 6.0)

    def test_example_7_restriction_agrees_with_the_expansion(self):
        for c in (2.0, 3.0, 4.0):
            with self.subTest(c=c):
                net = example_7(2, c)
                restricted = analyze(restrict(net, even_vertices(net)))
                self.assertAlmostEqual(restricted.rho, 4.0 * sech(c - 2.0) ** 2, delta=1e-8)
                self.assertEqual(restricted.rho < 1.0, expansion_rho(c) < 1.0)

    def test_restriction_identity(self):
        cases = [
            (example_5(2, 3.0), ("v2", "v4")),
            (example_6(), EXAMPLE_6_SET),
            (example_7(3, 3.0), ("v2", "v4", "v6")),
        ]
        for net, structural_set in cases:
            with self.subTest(network=net.name):
                self.assertTrue(restriction_identity_holds(net, structural_set))


class RegressionTableTests(SimpleTestCase):
    def test_all_regressions_pass(self):
        checks = run_regressions()
        failed = [check.name for check in checks if not check.passed]
        self.assertEqual(failed, [])
        self.assertEqual(len(checks), len(list(iter_regressions())))

    def test_check_tolerance(self):
        self.assertTrue(RegressionCheck("x", 1.0, 1.0 + 1e-9, 1e-8).passed)
        self.assertFalse(RegressionCheck("x", 1.0, 1.1, 1e-8).passed)

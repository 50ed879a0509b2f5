"""
Tests de simulación: órbitas, puntos fijos, atracción global y conjugación.
"""
import io
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase, override_settings

from netstab.services.delays import AugmentedNetwork, dedelay, undelay
from netstab.services.errors import ConvergenceError, DivergenceError, EvaluationError
from netstab.services.expr import Interval, Var
from netstab.services.network import build_network
from netstab.services.worked_examples import example_2, example_3, example_4
from netstab.services.sim import (
    conjugacy_check,
    find_fixed_point,
    iterate_orbit,
    random_history,
    verify_global_attraction,
)
from netstab.services.stability import analyze
from netstab.tests.factories import random_delayed_network, random_distributed_network, random_network, random_scale


def halving():
    return build_network([("x", None)], [("x", "0.5*x")], name="halving")


class OrbitTests(SimpleTestCase):
    def test_contraction_orbit(self):
        trajectory = iterate_orbit(halving(), [[4.0]], 3)
        np.testing.assert_allclose(trajectory.snapshots[:, 0], [4.0, 2.0, 1.0, 0.5])
        self.assertEqual(trajectory.steps, 3)
        self.assertEqual(trajectory.snapshot(0)[0], 4.0)
        self.assertEqual(trajectory.snapshot(3)[0], 0.5)
        self.assertEqual(trajectory.left_domain, ())

    def test_history_is_newest_first(self):
        net = example_2()
        history = np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6], [0.7, 0.8]])
        trajectory = iterate_orbit(net, history, 1)
        np.testing.assert_allclose(trajectory.snapshots[:4], history[::-1])
        expected = [
            0.5 * 0.3 + 0.2 * np.tanh(0.8),
            0.5 * 0.4 + 0.2 * np.tanh(0.7),
        ]
        np.testing.assert_allclose(trajectory.snapshot(1), expected, rtol=1e-14)

    def test_history_shape_is_checked(self):
        with self.assertRaises(EvaluationError):
            iterate_orbit(example_2(), [[0.0, 0.0]], 5)

    def test_divergence_reports_the_step(self):
        net = build_network([("x", None)], [("x", "exp(x)")])
        with self.assertRaises(DivergenceError) as ctx:
            iterate_orbit(net, [[10.0]], 5)
        self.assertEqual(ctx.exception.step, 2)

    def test_steps_outside_the_domain_are_flagged(self):
        net = build_network([("x", (-1, 1))], [("x", "2*x")])
        trajectory = iterate_orbit(net, [[0.4]], 3)
        self.assertEqual(trajectory.left_domain, (2, 3))

    def test_csv_export(self):
        stream = io.StringIO()
        iterate_orbit(halving(), [[4.0]], 2).write_csv(stream)
        self.assertEqual(stream.getvalue().splitlines(), ["step,x", "0,4.0", "1,2.0", "2,1.0"])

    def test_csv_of_a_delayed_network_starts_in_the_past(self):
        stream = io.StringIO()
        iterate_orbit(example_2(), np.zeros((4, 2)), 1).write_csv(stream)
        lines = stream.getvalue().splitlines()
        self.assertEqual(lines[0], "step,x1,x2")
        self.assertTrue(lines[1].startswith("-3,"))
        self.assertTrue(lines[-1].startswith("1,"))


class FixedPointTests(SimpleTestCase):
    def test_affine_map(self):
        net = build_network([("x", None)], [("x", "0.5*x + 1")])
        np.testing.assert_allclose(find_fixed_point(net), [2.0], atol=1e-9)

    def test_delayed_fixed_point_is_a_constant_orbit(self):
        net = example_2(c=(0.3, -0.2))
        point = find_fixed_point(net)
        trajectory = iterate_orbit(net, [point] * net.T, 5)
        np.testing.assert_allclose(trajectory.snapshots[-1], point, atol=1e-9)

    def test_delayed_and_undelayed_networks_share_fixed_points(self):
        rng = np.random.default_rng(41)
        checked = 0
        for k in range(40):
            scale = random_scale(rng)
            net = random_delayed_network(rng, scale=scale) if k % 2 else random_distributed_network(rng, scale=scale)
            flat = undelay(net)
            try:
                point = find_fixed_point(flat, max_iters=2000)
            except (ConvergenceError, DivergenceError):
                continue
            with self.subTest(case=k):
                trajectory = iterate_orbit(net, [point] * net.T, 3)
                np.testing.assert_allclose(trajectory.snapshots[-1], point, atol=1e-8)
                augmented = dedelay(net)
                lifted = [point[net.position(index.origin[0])] for index in augmented.indices]
                step = iterate_orbit(augmented.network, [lifted], 1)
                np.testing.assert_allclose(step.snapshots[-1], lifted, atol=1e-8)
                np.testing.assert_allclose(find_fixed_point(net, max_iters=2000), point, atol=1e-12)
            checked += 1
        self.assertGreater(checked, 5)

    def test_no_fixed_point(self):
        net = build_network([("x", None)], [("x", "x + 1")])
        with self.assertRaises(ConvergenceError):
            find_fixed_point(net, max_iters=50)

    def test_invalid_arguments(self):
        with self.assertRaises(EvaluationError):
            find_fixed_point(halving(), tol=0.0)
        with self.assertRaises(EvaluationError):
            find_fixed_point(halving(), guess=[0.0, 1.0])


class RandomHistoryTests(SimpleTestCase):
    def test_seed_is_reproducible(self):
        net = example_2()
        first = random_history(net, seed=3)
        np.testing.assert_array_equal(first, random_history(net, seed=3))
        self.assertEqual(first.shape, (4, 2))
        self.assertFalse(np.array_equal(first, random_history(net, seed=4)))

    @override_settings(NETSTAB_SAMPLE_BOX=0.5)
    def test_sample_box_from_settings(self):
        self.assertTrue(np.all(np.abs(random_history(example_2(), seed=1)) <= 0.5))

    def test_node_domain_clips_the_box(self):
        net = build_network([("x", (0, 1))], [("x", "0.5*x")])
        values = random_history(net, seed=2)
        self.assertTrue(np.all((values >= 0.0) & (values <= 1.0)))

    def test_unbounded_box(self):
        with self.assertRaises(EvaluationError):
            random_history(halving(), sample_box=Interval.real_line())


class AttractionTests(SimpleTestCase):
    """Veredicto empírico de atracción global."""

    def test_stable_example_converges_to_the_origin(self):
        verdict = verify_global_attraction(example_4())
        self.assertTrue(verdict.converged)
        np.testing.assert_allclose(verdict.witness, [0.0, 0.0], atol=1e-6)
        self.assertLessEqual(verdict.final_diameter, 1e-6)
        self.assertEqual((verdict.trials, verdict.seed), (20, 0))

    def test_repelling_fixed_point_does_not_converge(self):
        verdict = verify_global_attraction(example_3(), steps=2000)
        self.assertFalse(verdict.converged)
        self.assertIsNone(verdict.witness)

    def test_same_seed_same_verdict(self):
        first = verify_global_attraction(halving(), seed=5)
        second = verify_global_attraction(halving(), seed=5)
        self.assertEqual(first, second)

    def test_needs_two_trials(self):
        with self.assertRaises(EvaluationError):
            verify_global_attraction(halving(), trials=1)

    def test_stable_random_networks_are_attracted(self):
        rng = np.random.default_rng(51)
        checked = 0
        for k in range(20):
            net = random_network(rng, scale=0.8) if k % 2 else random_delayed_network(rng, scale=0.8)
            if analyze(net).rho >= 1.0 - 1e-3:
                continue
            with self.subTest(case=k):
                verdict = verify_global_attraction(net, trials=20, steps=5000, tol=1e-6)
                self.assertTrue(verdict.converged)
            checked += 1
        self.assertGreater(checked, 0)


class ConjugacyTests(SimpleTestCase):
    def test_example_2(self):
        net = example_2()
        self.assertTrue(conjugacy_check(net, random_history(net, seed=0), 100))

    def test_miswired_delay_line_is_detected(self):
        net = example_2()
        augmented = dedelay(net)
        updates = list(augmented.network.updates)
        updates[augmented.network.position("x2__d2")] = Var("x2__d2")
        broken = AugmentedNetwork(
            network=replace(augmented.network, updates=tuple(updates)),
            indices=augmented.indices,
        )
        self.assertFalse(conjugacy_check(net, random_history(net, seed=0), 20, augmented=broken))

    def test_random_delayed_networks(self):
        rng = np.random.default_rng(61)
        for k in range(100):
            net = random_delayed_network(rng)
            with self.subTest(case=k):
                self.assertTrue(conjugacy_check(net, random_history(net, seed=k), 100))

"""
Tests de las transformaciones de retardos.
"""
import numpy as np
from django.test import SimpleTestCase

from netstab.services.delays import SequenceIndex, StateIndex, dedelay, shift_delay, undelay
from netstab.services.errors import TransformError
from netstab.services.expr import Var, simplify, substitute
from netstab.services.network import build_network
from netstab.services.worked_examples import example_2, example_3, example_4
from netstab.tests.factories import random_delayed_network, random_distributed_network, random_network


class DedelayTests(SimpleTestCase):
    """Líneas de retardo canónicas: una coordenada por (nodo, profundidad)."""

    def test_example_2_gets_three_lines_per_node(self):
        augmented = dedelay(example_2())
        self.assertEqual(augmented.dimension, 8)
        self.assertEqual(
            augmented.labels,
            ("x1", "x2", "x1__d1", "x1__d2", "x1__d3", "x2__d1", "x2__d2", "x2__d3"),
        )
        self.assertEqual(augmented.base_nodes, ("x1", "x2"))
        self.assertEqual(augmented.network.T, 1)
        self.assertEqual(augmented.network.name, "example_2_dedelayed")

    def test_lines_shift_the_previous_depth(self):
        network = dedelay(example_2()).network
        self.assertEqual(network.update("x1__d1"), Var("x1"))
        self.assertEqual(network.update("x1__d3"), Var("x1__d2"))
        self.assertEqual(network.references("x1"), {("x1__d1", 0), ("x2__d3", 0)})

    def test_projection_maps_lines_to_delayed_nodes(self):
        projection = dedelay(example_2()).projection
        self.assertEqual(projection[StateIndex("x2", 2)], ("x2", 2))
        self.assertEqual(projection[StateIndex("x1")], ("x1", 0))

    def test_undelayed_network_is_left_alone(self):
        net = example_4()
        augmented = dedelay(net)
        self.assertIs(augmented.network, net)
        self.assertEqual(augmented.indices, (StateIndex("x1"), StateIndex("x2")))

    def test_lines_inherit_the_node_domain(self):
        net = build_network([("a", (-1, 1)), ("b", None)], [("a", "b[-1]"), ("b", "tanh(a[-2])")])
        network = dedelay(net).network
        self.assertEqual(network.domain("a__d2"), net.domain("a"))
        self.assertEqual(network.domain("b__d1"), net.domain("b"))

    def test_label_collisions_are_rejected(self):
        net = build_network([("a", None), ("a__d1", None)], [("a", "a[-1]"), ("a__d1", "a")])
        with self.assertRaises(TransformError):
            dedelay(net)


class IndexTests(SimpleTestCase):
    def test_sequence_index_label_and_origin(self):
        index = SequenceIndex(("v2", "v1", "v2"), 2)
        self.assertEqual(index.label, "g__v2_v1_v2__2")
        self.assertEqual(index.origin, ("v2", 1))
        self.assertFalse(index.is_base)

    def test_state_index_label(self):
        self.assertEqual(StateIndex("x").label, "x")
        self.assertEqual(StateIndex("x", 4).label, "x__d4")
        self.assertTrue(StateIndex("x").is_base)


class UndelayTests(SimpleTestCase):
    def test_example_2_becomes_example_4(self):
        self.assertEqual(undelay(example_2()), example_4())
        self.assertEqual(undelay(example_2()).name, "example_2_undelayed")

    def test_distributed_delays_cancel(self):
        expected = build_network([("x1", None), ("x2", None)], [("x1", "0.5*x1"), ("x2", "0.5*x2")])
        self.assertEqual(undelay(example_3()), expected)

    def test_undelayed_network_is_returned_as_is(self):
        net = example_4()
        self.assertIs(undelay(net), net)


class ShiftDelayTests(SimpleTestCase):
    def test_shift_reduces_one_reference(self):
        shifted = shift_delay(example_2(), "x1", "x2", 3)
        self.assertEqual(shifted.references("x1"), {("x1", 1), ("x2", 2)})
        self.assertEqual(shifted.references("x2"), example_2().references("x2"))

    def test_shift_can_cancel_a_distributed_delay(self):
        shifted = shift_delay(example_3(), "x1", "x2", 1)
        self.assertEqual(shifted.references("x1"), {("x1", 0)})
        self.assertEqual(shifted.T, 2)
        self.assertEqual(undelay(shifted), undelay(example_3()))

    def test_invalid_shifts(self):
        with self.assertRaises(TransformError):
            shift_delay(example_2(), "x1", "x2", 0)
        with self.assertRaises(TransformError):
            shift_delay(example_2(), "x1", "x2", 2)


class DelayRoundTripTests(SimpleTestCase):
    """dedelay y undelay se deshacen sobre las coordenadas originales."""

    def test_undelayed_networks_are_fixed_points_of_both(self):
        rng = np.random.default_rng(21)
        for k in range(30):
            net = random_network(rng)
            with self.subTest(case=k):
                self.assertEqual(dedelay(net).network, net)
                self.assertEqual(undelay(dedelay(net).network), net)

    def test_dedelayed_network_has_no_delays_left(self):
        rng = np.random.default_rng(22)
        for k in range(30):
            augmented = dedelay(random_delayed_network(rng))
            with self.subTest(case=k):
                self.assertEqual(augmented.network.T, 1)
                self.assertEqual(undelay(augmented.network), augmented.network)

    def test_folding_lines_back_gives_the_undelayed_network(self):
        rng = np.random.default_rng(23)
        nets = [random_delayed_network(rng) for _ in range(20)] + [random_distributed_network(rng) for _ in range(20)]
        for k, net in enumerate(nets):
            augmented = dedelay(net)
            origin = {index.label: index.origin[0] for index in augmented.indices}
            folded = [
                simplify(substitute(update, lambda var: Var(origin[var.node])))
                for update in augmented.network.updates[: net.size]
            ]
            with self.subTest(case=k):
                self.assertEqual(tuple(folded), undelay(net).updates)

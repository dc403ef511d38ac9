from unittest import TestCase

import numpy as np

from ebdg.errors import QuadratureError
from ebdg.numerics.quadrature import (MAX_ORDER, REFERENCE_VOLUME, gauss_legendre, quadrature_orders, surface_rules,
                                      triangle_degrees, volume_rule)


def _integrate(rule, f):
    return float(np.sum(rule.weights * f(rule.points)))


class TestGaussLegendre(TestCase):

    def test_weights_sum_to_interval_length(self):
        for n in range(1, 11):
            self.assertAlmostEqual(float(gauss_legendre(n).weights.sum()), 2.0)
            self.assertAlmostEqual(float(gauss_legendre(n, (0.0, 1.0)).weights.sum()), 1.0)

    def test_exact_degree(self):
        rule = gauss_legendre(3)
        self.assertEqual(rule.exact_degree, 5)
        # int_{-1}^{1} x^4 dx
        self.assertAlmostEqual(_integrate(rule, lambda x: x[:, 0] ** 4), 0.4)

    def test_point_count_out_of_range(self):
        self.assertRaises(QuadratureError, gauss_legendre, 0)
        self.assertRaises(QuadratureError, gauss_legendre, 11)


class TestVolumeRules(TestCase):

    def test_weights_sum_to_reference_volume(self):
        for shape in ("line", "quad", "triangle"):
            for order in range(MAX_ORDER + 1):
                rule = volume_rule(shape, order)
                self.assertAlmostEqual(float(rule.weights.sum()), REFERENCE_VOLUME[shape], places=12)
                self.assertTrue(np.all(rule.weights > 0.0))
                self.assertGreaterEqual(rule.exact_degree, order)

    def test_quad_first_coordinate_runs_fastest(self):
        rule = volume_rule("quad", 3)
        self.assertEqual(rule.num_points, 4)
        self.assertAlmostEqual(rule.points[0, 1], rule.points[1, 1])
        self.assertLess(rule.points[0, 0], rule.points[1, 0])

    def test_quad_integrates_tensor_monomials(self):
        rule = volume_rule("quad", 5)
        # int x^4 y^2 over [-1, 1]^2 = (2/5)(2/3)
        value = _integrate(rule, lambda r: r[:, 0] ** 4 * r[:, 1] ** 2)
        self.assertAlmostEqual(value, 4.0 / 15.0)

    def test_triangle_integrates_monomials(self):
        # int r^a s^b over the unit triangle = a! b! / (a + b + 2)!
        cases = [(0, 0, 0.5), (1, 0, 1.0 / 6.0), (2, 1, 2.0 / 120.0), (4, 0, 24.0 / 720.0), (3, 3, 36.0 / 40320.0)]
        rule = volume_rule("triangle", 6)
        for a, b, exact in cases:
            value = _integrate(rule, lambda r: r[:, 0] ** a * r[:, 1] ** b)
            self.assertAlmostEqual(value, exact, places=10)

    def test_triangle_points_inside(self):
        for degree in triangle_degrees():
            points = volume_rule("triangle", degree).points
            self.assertTrue(np.all(points >= -1e-14))
            self.assertTrue(np.all(points.sum(axis=1) <= 1.0 + 1e-14))

    def test_invalid_requests(self):
        self.assertRaises(QuadratureError, volume_rule, "line", 10)
        self.assertRaises(QuadratureError, volume_rule, "quad", -1)
        self.assertRaises(QuadratureError, volume_rule, "hexahedron", 2)


class TestSurfaceRules(TestCase):

    def test_line_end_points(self):
        surface = surface_rules("line", 3)
        self.assertEqual(surface.num_faces, 2)
        self.assertEqual(surface.points_per_face, 1)
        np.testing.assert_allclose(surface.reference_points[:, 0, 0], [-1.0, 1.0])

    def test_edges_follow_vertex_order(self):
        surface = surface_rules("triangle", 3)
        self.assertEqual(surface.num_faces, 3)
        self.assertEqual(surface.points_per_face, 2)
        np.testing.assert_allclose(surface.tangents, [[1.0, 0.0], [-1.0, 1.0], [0.0, -1.0]])
        # points of edge 1 lie on r + s = 1
        np.testing.assert_allclose(surface.reference_points[1].sum(axis=1), [1.0, 1.0])
        self.assertAlmostEqual(float(surface.rules[0].weights.sum()), 1.0)

    def test_quad_edges(self):
        surface = surface_rules("quad", 5)
        self.assertEqual(surface.num_faces, 4)
        self.assertEqual(surface.points_per_face, 3)
        np.testing.assert_allclose(surface.reference_points[0][:, 1], -1.0)
        np.testing.assert_allclose(surface.reference_points[1][:, 0], 1.0)
        np.testing.assert_allclose(surface.reference_points[2][:, 1], 1.0)
        np.testing.assert_allclose(surface.reference_points[3][:, 0], -1.0)


class TestQuadratureOrders(TestCase):

    def test_default_orders(self):
        self.assertEqual(quadrature_orders("line", 2), (5, 5))
        self.assertEqual(quadrature_orders("quad", 3), (7, 7))
        self.assertEqual(quadrature_orders("triangle", 1), (4, 3))
        self.assertEqual(quadrature_orders("triangle", 4), (9, 9))

    def test_unsupported_polynomial_order(self):
        self.assertRaises(QuadratureError, quadrature_orders, "line", 0)
        self.assertRaises(QuadratureError, quadrature_orders, "quad", 5)

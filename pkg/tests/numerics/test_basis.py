from unittest import TestCase

import numpy as np

from ebdg.errors import BasisConstructionError, ContractViolationError
from ebdg.numerics.basis import ReferenceElement, l2_project, modal_basis, num_basis, reference_element
from ebdg.numerics.quadrature import REFERENCE_VOLUME, volume_rule


class TestModalBasis(TestCase):

    def test_basis_sizes(self):
        self.assertEqual(num_basis("line", 3), 4)
        self.assertEqual(num_basis("quad", 2), 9)
        self.assertEqual(num_basis("triangle", 4), 15)
        self.assertRaises(BasisConstructionError, num_basis, "prism", 1)

    def test_orthonormal_on_every_shape(self):
        for shape in ("line", "quad", "triangle"):
            for p in range(1, 5):
                ref = ReferenceElement(shape, p)
                np.testing.assert_allclose(ref.mass, np.eye(ref.n_basis), atol=1e-10,
                                           err_msg=f"{shape} p={p}")

    def test_constant_mode(self):
        for shape in ("line", "quad", "triangle"):
            values, _ = modal_basis(shape, 2, volume_rule(shape, 5).points)
            np.testing.assert_allclose(np.abs(values[:, 0]), 1.0 / np.sqrt(REFERENCE_VOLUME[shape]))

    def test_line_gradient(self):
        values, gradients = modal_basis("line", 1, np.array([[0.3]]))
        self.assertAlmostEqual(values[0, 1], np.sqrt(1.5) * 0.3)
        self.assertAlmostEqual(gradients[0, 1, 0], np.sqrt(1.5))
        self.assertEqual(gradients[0, 0, 0], 0.0)

    def test_point_outside_reference_element(self):
        self.assertRaises(ContractViolationError, modal_basis, "line", 2, np.array([[1.5]]))
        self.assertRaises(ContractViolationError, modal_basis, "triangle", 2, np.array([[0.8, 0.8]]))
        values, _ = modal_basis("triangle", 2, np.array([[0.8, 0.8]]), check=False)
        self.assertEqual(values.shape, (1, 6))


class TestReferenceElement(TestCase):

    def test_interpolation_round_trip(self):
        ref = ReferenceElement("quad", 2)
        coeffs = np.arange(18, dtype=float).reshape(9, 2)
        np.testing.assert_allclose(ref.from_point_values(ref.to_point_values(coeffs)), coeffs, atol=1e-10)

    def test_lagrange_basis_is_nodal(self):
        for shape in ("line", "quad", "triangle"):
            ref = ReferenceElement(shape, 3)
            nodes = ref.volume_rule.points[ref.interp_index]
            np.testing.assert_allclose(ref.lagrange_at(nodes), np.eye(ref.n_basis), atol=1e-9)

    def test_surface_lagrange_partition_of_unity(self):
        ref = ReferenceElement("triangle", 2)
        table = ref.surface_lagrange()
        self.assertEqual(table.shape, (3, ref.points_per_face, 6))
        np.testing.assert_allclose(table.sum(axis=-1), 1.0, atol=1e-10)

    def test_surface_tables(self):
        ref = ReferenceElement("line", 2)
        self.assertEqual(ref.phi_surf.shape, (2, 1, 3))
        # right end point: phi_n(1) = sqrt((2n + 1) / 2)
        np.testing.assert_allclose(ref.phi_surf[1, 0], np.sqrt([0.5, 1.5, 2.5]))

    def test_reference_element_is_cached(self):
        self.assertIs(reference_element("quad", 1), reference_element("quad", 1))

    def test_too_few_volume_points(self):
        self.assertRaises(BasisConstructionError, ReferenceElement, "line", 3, 1)


class TestL2Projection(TestCase):

    def test_linear_function_is_reproduced(self):
        ref = ReferenceElement("line", 1)
        rule = volume_rule("line", 5)
        points = rule.points[np.newaxis]
        jac_det = np.ones((1, rule.num_points))
        coeffs = l2_project(lambda x: 2.0 + 3.0 * x, ref, points, jac_det, rule)
        self.assertEqual(coeffs.shape, (1, 2, 1))
        value = ref.eval_basis(np.array([[0.5]])) @ coeffs[0]
        self.assertAlmostEqual(float(value[0, 0]), 3.5)

    def test_rule_below_twice_the_order(self):
        ref = ReferenceElement("line", 2)
        rule = volume_rule("line", 1)
        self.assertRaises(ContractViolationError, l2_project, lambda x: x, ref, rule.points[np.newaxis],
                          np.ones((1, rule.num_points)), rule)

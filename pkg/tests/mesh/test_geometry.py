import logging
from unittest import TestCase

import numpy as np

from ebdg.errors import InvertedElementError, MeshError
from ebdg.mesh.generators import curved_periodic_quads, rectangle, uniform_interval
from ebdg.mesh.geometry import (GEOMETRIC_ELEMENTS, ElementGeometry, Mesh, build_connectivity,
                                characteristic_length, geometric_basis, map_points)
from ebdg.numerics.basis import ReferenceElement


class TestGeometricBasis(TestCase):

    def test_partition_of_unity(self):
        points = np.array([[-0.3, 0.7], [0.1, -0.9], [0.0, 0.0]])
        for name in ("quad4", "quad9", "quad16"):
            values, gradients = geometric_basis(name, points)
            np.testing.assert_allclose(values.sum(axis=1), 1.0, atol=1e-12)
            np.testing.assert_allclose(gradients.sum(axis=1), 0.0, atol=1e-11)

    def test_nodal(self):
        for name in ("tri6", "tri10", "quad9"):
            values, _ = geometric_basis(name, GEOMETRIC_ELEMENTS[name].nodes)
            np.testing.assert_allclose(values, np.eye(len(values)), atol=1e-10)


class TestConnectivity(TestCase):

    def test_periodic_interval(self):
        mesh = uniform_interval(4)
        self.assertEqual(mesh.num_faces, 4)
        self.assertEqual(len(mesh.boundary_faces), 0)
        self.assertEqual(int(mesh.face_periodic.sum()), 1)
        np.testing.assert_array_equal(mesh.neighbor_table()[0], [3, 1])
        np.testing.assert_array_equal(mesh.neighbors(0), [1, 3])

    def test_face_shared_by_three_elements(self):
        mesh = Mesh(element_type="line2", nodes=np.array([[0.0], [1.0], [2.0], [3.0]]),
                    elements=np.array([[0, 1], [1, 2], [1, 3]]))
        self.assertRaises(MeshError, build_connectivity, mesh, {})

    def test_untagged_faces_are_unassigned(self):
        mesh = Mesh(element_type="line2", nodes=np.array([[0.0], [1.0]]), elements=np.array([[0, 1]]))
        with self.assertLogs("test_connectivity", level="WARNING"):
            build_connectivity(mesh, {(0,): "left"}, logger=logging.getLogger("test_connectivity"))
        self.assertEqual(mesh.boundary_names, ["left", "unassigned"])


class TestElementGeometry(TestCase):

    def test_interval(self):
        geometry = ElementGeometry(uniform_interval(4), ReferenceElement("line", 2))
        np.testing.assert_allclose(geometry.volume, 0.25)
        np.testing.assert_allclose(geometry.normals[:, 0, 0, 0], -1.0)
        np.testing.assert_allclose(geometry.normals[:, 1, 0, 0], 1.0)
        np.testing.assert_allclose(geometry.zeta, 4.0)
        np.testing.assert_allclose(geometry.characteristic_length, 0.25)
        self.assertTrue(np.all(geometry.affine))

    def test_square_of_quads(self):
        mesh = rectangle(2, 2)
        geometry = ElementGeometry(mesh, ReferenceElement("quad", 2))
        np.testing.assert_allclose(geometry.volume, 0.25)
        np.testing.assert_allclose(geometry.face_measure, 0.5)
        np.testing.assert_allclose(geometry.surface_area, 2.0)
        self.assertAlmostEqual(characteristic_length(geometry, 0), 0.5)
        np.testing.assert_allclose(geometry.closed_surface_residual(), 0.0, atol=1e-12)
        self.assertTrue(np.all(geometry.affine))

        x, _, det = map_points(mesh, np.array([[0.0, 0.0]]))
        np.testing.assert_allclose(x[0, 0], [0.25, 0.25])
        np.testing.assert_allclose(det, 1.0 / 16.0)

    def test_characteristic_length_of_squares(self):
        for n in (2, 4, 10):
            geometry = ElementGeometry(rectangle(n, n), ReferenceElement("quad", 1))
            h = 1.0 / n
            # faces run over [0, 1], so |J| on a face is the side length
            np.testing.assert_allclose(geometry.surf_jac, h)
            np.testing.assert_allclose(geometry.characteristic_length, h)
            np.testing.assert_allclose(geometry.zeta.sum(axis=(1, 2)), 4.0 / h)

    def test_points_of_the_limiter_set(self):
        geometry = ElementGeometry(rectangle(1, 1, element="triangle"), ReferenceElement("triangle", 1))
        ref = geometry.ref
        self.assertEqual(geometry.points_D.shape,
                         (2, ref.num_volume_points + ref.num_faces * ref.points_per_face, 2))
        np.testing.assert_allclose(geometry.volume, 0.5)

    def test_curved_periodic_square(self):
        geometry = ElementGeometry(curved_periodic_quads(3), ReferenceElement("quad", 2))
        self.assertAlmostEqual(float(geometry.volume.sum()), 1.0, places=12)
        self.assertFalse(np.all(geometry.affine))
        np.testing.assert_allclose(geometry.closed_surface_residual(), 0.0, atol=1e-11)

    def test_inverted_element(self):
        nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        mesh = build_connectivity(Mesh(element_type="quad4", nodes=nodes, elements=np.array([[0, 3, 2, 1]])),
                                  {(0, 1): "a", (1, 2): "a", (2, 3): "a", (0, 3): "a"})
        with self.assertRaises(InvertedElementError) as context:
            ElementGeometry(mesh, ReferenceElement("quad", 1))
        self.assertEqual(context.exception.element_ids, [0])

    def test_shape_mismatch(self):
        self.assertRaises(MeshError, ElementGeometry, rectangle(1, 1), ReferenceElement("triangle", 1))

from unittest import TestCase

import numpy as np

from ebdg.cases import (CaseSpec, boundary_conditions, build_mesh, convergence_rows, convergence_study, error_norms,
                        exact_solution, initial_state, initialize, normal_shock, quadrature_l2)
from ebdg.errors import CaseError
from ebdg.mesh.generators import uniform_interval
from ebdg.mesh.geometry import ElementGeometry
from ebdg.numerics.basis import ReferenceElement
from ebdg.numerics.dg import conserved_totals
from ebdg.numerics.euler import GasModel, is_admissible


def _geometry(case: CaseSpec, p: int) -> ElementGeometry:
    mesh = build_mesh(case)
    return ElementGeometry(mesh, ReferenceElement(mesh.shape, p))


class TestNormalShock(TestCase):

    def test_mach_two(self):
        shock = normal_shock(2.0, GasModel())
        self.assertAlmostEqual(shock.speed, 2.0)
        rho2, u2, p2 = shock.post
        self.assertAlmostEqual(rho2, 1.4 * 2.4 * 4.0 / 3.6)
        self.assertAlmostEqual(u2, 1.25)
        self.assertAlmostEqual(p2, 4.5)
        # mass flux through the moving front
        self.assertAlmostEqual(1.4 * (0.0 - shock.speed), rho2 * (u2 - shock.speed))

    def test_invalid_shocks(self):
        self.assertRaises(CaseError, normal_shock, 0.5, GasModel())
        self.assertRaises(CaseError, normal_shock, 2.0, GasModel(), (1.4, 0.1, 1.0))


class TestCaseSpec(TestCase):

    def test_default_end_times(self):
        self.assertEqual(CaseSpec("advect1d", 0.1).end_time, 1.0)
        self.assertAlmostEqual(CaseSpec("shock1d", 0.01, mach=2.0).end_time, 0.5)
        self.assertEqual(CaseSpec("sod_periodic", 0.1).end_time, 0.1)
        self.assertEqual(CaseSpec("dmr", 0.1).end_time, 0.25)
        self.assertEqual(CaseSpec("cylinder", 1.0).end_time, 200.0)
        self.assertEqual(CaseSpec("advect1d", 0.1, end_time=0.3).end_time, 0.3)

    def test_invalid_cases(self):
        self.assertRaises(CaseError, CaseSpec, "blast", 0.1)
        self.assertRaises(CaseError, CaseSpec, "advect1d", 0.0)

    def test_exact_solution_availability(self):
        self.assertTrue(CaseSpec("advect1d", 0.1).has_exact_solution)
        self.assertFalse(CaseSpec("dmr", 0.1).has_exact_solution)


class TestMeshesAndBoundaries(TestCase):

    def test_one_dimensional_meshes(self):
        mesh = build_mesh(CaseSpec("advect1d", 1.0 / 20.0))
        self.assertEqual(mesh.num_elements, 20)
        self.assertEqual(len(mesh.boundary_faces), 0)
        self.assertEqual(boundary_conditions(CaseSpec("advect1d", 1.0 / 20.0)), {})

        case = CaseSpec("shock1d", 0.01)
        mesh = build_mesh(case)
        self.assertEqual(mesh.num_elements, 120)
        self.assertAlmostEqual(mesh.nodes[0, 0], -0.1)
        self.assertAlmostEqual(mesh.nodes[-1, 0], 1.1)
        bcs = boundary_conditions(case)
        self.assertEqual(set(bcs), set(mesh.boundary_names))
        self.assertEqual(bcs["left"].kind, "supersonic_inflow")
        self.assertEqual(bcs["right"].kind, "farfield")

    def test_double_mach_reflection(self):
        case = CaseSpec("dmr", 0.25)
        mesh = build_mesh(case)
        self.assertEqual(mesh.num_elements, 64)
        self.assertEqual(set(boundary_conditions(case)), set(mesh.boundary_names))
        names = [mesh.boundary_names[t] for t in mesh.face_tag[mesh.boundary_faces]]
        self.assertEqual(names.count("bottom_inflow"), 1)
        self.assertEqual(names.count("wall"), 15)

        rho = initial_state(case, np.array([[0.1, 0.0], [1.0, 0.0]]))[:, 0]
        np.testing.assert_allclose(rho, [8.0, 1.4])

    def test_cylinder(self):
        case = CaseSpec("cylinder", 1.0)
        mesh = build_mesh(case)
        self.assertEqual(mesh.element_type, "quad16")
        self.assertEqual(mesh.num_elements, 8 * 24)
        self.assertEqual(set(boundary_conditions(case)), {"wall", "farfield"})
        self.assertEqual(build_mesh(CaseSpec("cylinder", 1.0, level=2)).num_elements, 16 * 48)


class TestExactSolutions(TestCase):

    def test_advection(self):
        rho, velocity, p = exact_solution(CaseSpec("advect1d", 0.1), np.array([[0.25], [0.5]]), 0.0)
        np.testing.assert_allclose(rho, [1.1, 1.0])
        np.testing.assert_allclose(velocity[:, 0], 1.0)
        np.testing.assert_allclose(p, 1.0)
        shifted, _, _ = exact_solution(CaseSpec("advect1d", 0.1), np.array([[0.5]]), 0.75)
        np.testing.assert_allclose(shifted, [0.9])

    def test_moving_shock(self):
        case = CaseSpec("shock1d", 0.01, mach=2.0)
        rho, _, _ = exact_solution(case, np.array([[0.1], [0.3]]), 0.1)
        np.testing.assert_allclose(rho, [case.shock.post[0], 1.4])

    def test_no_exact_solution(self):
        self.assertRaises(CaseError, exact_solution, CaseSpec("sod_periodic", 0.1), np.zeros((1, 1)), 0.0)


class TestInitialization(TestCase):

    def test_smooth_projection(self):
        case = CaseSpec("advect1d", 0.1)
        geometry = _geometry(case, 2)
        solution = initialize(case, geometry)
        self.assertEqual(solution.coeffs.shape, (10, 3, 3))
        self.assertAlmostEqual(float(conserved_totals(solution.coeffs, geometry)[0]), 1.0, places=8)
        errors = error_norms(solution.coeffs, geometry, case, 0.0)
        self.assertEqual(set(errors), {"density", "momentum", "energy"})
        self.assertLess(errors["density"], 1e-3)

    def test_discontinuous_projection_is_admissible(self):
        case = CaseSpec("sod_periodic", 0.1)
        geometry = _geometry(case, 3)
        coeffs = initialize(case, geometry).coeffs
        ref = geometry.ref
        phi_points = np.concatenate([ref.phi_vol, ref.phi_surf.reshape(-1, ref.n_basis)], axis=0)
        self.assertTrue(np.all(is_admissible(np.einsum("dm,emv->edv", phi_points, coeffs), case.gas)))

    def test_dimension_mismatch(self):
        geometry = ElementGeometry(uniform_interval(4), ReferenceElement("line", 1))
        self.assertRaises(CaseError, initialize, CaseSpec("dmr", 0.25), geometry)

    def test_cylinder_freestream_has_no_entropy_error(self):
        case = CaseSpec("cylinder", 1.0)
        geometry = _geometry(case, 1)
        errors = error_norms(initialize(case, geometry).coeffs, geometry, case, 0.0)
        self.assertLess(errors["entropy"], 1e-10)

    def test_error_norm_without_reference(self):
        case = CaseSpec("sod_periodic", 0.1)
        geometry = _geometry(case, 1)
        self.assertRaises(CaseError, error_norms, initialize(case, geometry).coeffs, geometry, case, 0.0)

    def test_quadrature_l2(self):
        geometry = ElementGeometry(uniform_interval(4), ReferenceElement("line", 1))
        self.assertAlmostEqual(float(quadrature_l2(np.ones_like(geometry.det_vol), geometry)), 1.0)


class TestConvergence(TestCase):

    def test_rates(self):
        rows = convergence_rows([0.1, 0.05, 0.025], [1e-2, 2.5e-3, 6.25e-4])
        self.assertIsNone(rows[0]["rate"])
        self.assertAlmostEqual(rows[1]["rate"], 2.0)
        self.assertAlmostEqual(rows[2]["rate"], 2.0)

    def test_study_with_custom_evaluation(self):
        def evaluate(case, p, h):
            return h ** (p + 1)

        rows = convergence_study(CaseSpec("advect1d", 0.1), 2, [0.1, 0.05, 0.025, 0.0125], evaluate)
        self.assertEqual([row["h"] for row in rows], [0.1, 0.05, 0.025, 0.0125])
        for row in rows[1:]:
            self.assertAlmostEqual(row["rate"], 3.0)

    def test_too_few_levels(self):
        self.assertRaises(CaseError, convergence_study, CaseSpec("advect1d", 0.1), 2, [0.1, 0.05], lambda *a: 1.0)

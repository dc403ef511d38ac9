from unittest import TestCase

import numpy as np

from ebdg.errors import AdmissibilityError, ContractViolationError
from ebdg.numerics.euler import (GasModel, combined_speed_bound, conservative_from_primitive, entropy, flux,
                                 is_admissible, lax_friedrichs_flux, mach_number, max_wave_speed, normal_flux,
                                 pressure, primitive_from_conservative, sound_speed, speed_bound_factor)


class TestGasModel(TestCase):

    def test_defaults(self):
        gas = GasModel()
        self.assertEqual(gas.gamma, 1.4)
        self.assertEqual(gas.s_ref, 0.0)

    def test_invalid_gamma(self):
        self.assertRaises(ValueError, GasModel, 1.0)
        self.assertRaises(ValueError, GasModel, 0.5)


class TestStateConversions(TestCase):
    gas = GasModel()

    def test_state_at_rest(self):
        U = conservative_from_primitive(1.0, 0.0, 1.0, self.gas)
        np.testing.assert_allclose(U, [1.0, 0.0, 2.5])

    def test_two_dimensional_state(self):
        U = conservative_from_primitive(2.0, [1.0, 0.5], 1.0, self.gas)
        np.testing.assert_allclose(U, [2.0, 2.0, 1.0, 3.75])

    def test_primitive_round_trip(self):
        U = conservative_from_primitive(np.array([1.0, 0.125]), np.array([0.3, -0.2]), np.array([1.0, 0.1]),
                                        self.gas)
        rho, u, p = primitive_from_conservative(U, self.gas)
        np.testing.assert_allclose(rho, [1.0, 0.125])
        np.testing.assert_allclose(u[:, 0], [0.3, -0.2])
        np.testing.assert_allclose(p, [1.0, 0.1])

    def test_pressure_of_inadmissible_state_is_still_defined(self):
        self.assertAlmostEqual(float(pressure(np.array([1.0, 0.0, -1.0]), self.gas)), -0.4)

    def test_is_admissible(self):
        U = np.array([[1.0, 0.0, 2.5], [-1.0, 0.0, 2.5], [1.0, 0.0, -1.0]])
        np.testing.assert_array_equal(is_admissible(U, self.gas), [True, False, False])

    def test_non_positive_density_reports_location(self):
        U = np.array([[[1.0, 0.0, 2.5], [1.0, 0.0, 2.5]],
                      [[1.0, 0.0, 2.5], [0.0, 0.0, 2.5]]])
        with self.assertRaises(AdmissibilityError) as context:
            primitive_from_conservative(U, self.gas)
        self.assertEqual(context.exception.element, 1)
        self.assertEqual(context.exception.point, 1)

    def test_non_positive_pressure_rejected(self):
        U = np.array([[1.0, 0.0, 2.5], [1.0, 2.0, 1.0]])
        with self.assertRaises(AdmissibilityError) as context:
            flux(U, self.gas)
        self.assertEqual(context.exception.element, 1)
        self.assertIn("pressure", str(context.exception))


class TestPointwisePhysics(TestCase):
    gas = GasModel()

    def test_one_dimensional_flux(self):
        U = conservative_from_primitive(1.0, 1.0, 1.0, self.gas)
        F = flux(U, self.gas)
        self.assertEqual(F.shape, (3, 1))
        np.testing.assert_allclose(F[:, 0], [1.0, 2.0, 4.0])

    def test_two_dimensional_flux(self):
        U = conservative_from_primitive(1.0, [1.0, 2.0], 1.0, self.gas)
        F = flux(U, self.gas)
        self.assertEqual(F.shape, (4, 2))
        np.testing.assert_allclose(F[0], [1.0, 2.0])
        np.testing.assert_allclose(F[1], [2.0, 2.0])
        np.testing.assert_allclose(F[2], [2.0, 5.0])
        # E = 2.5 + 2.5, (E + p) u
        np.testing.assert_allclose(F[3], [6.0, 12.0])

    def test_wave_speeds(self):
        U = conservative_from_primitive(1.0, 0.5, 1.0, self.gas)
        self.assertAlmostEqual(float(sound_speed(U, self.gas)), np.sqrt(1.4))
        self.assertAlmostEqual(float(max_wave_speed(U, self.gas)), 0.5 + np.sqrt(1.4))
        self.assertAlmostEqual(float(mach_number(U, self.gas)), 0.5 / np.sqrt(1.4))

    def test_entropy(self):
        U = conservative_from_primitive(np.array([1.0, 2.0]), np.array([0.0, 0.0]), np.array([1.0, 1.0]), self.gas)
        np.testing.assert_allclose(entropy(U, self.gas), [0.0, -1.4 * np.log(2.0)])

    def test_entropy_reference_shift(self):
        gas = GasModel(s_ref=0.5)
        U = conservative_from_primitive(1.0, 0.0, 1.0, gas)
        self.assertAlmostEqual(float(entropy(U, gas)), 0.5)


class TestLaxFriedrichsFlux(TestCase):
    gas = GasModel()

    def test_consistency(self):
        U = conservative_from_primitive(1.0, [0.3, -0.4], 2.0, self.gas)
        normal = np.array([0.6, 0.8])
        lam = max_wave_speed(U, self.gas)
        np.testing.assert_allclose(lax_friedrichs_flux(U, U, normal, lam, self.gas), normal_flux(U, normal, self.gas))

    def test_conservation_under_reversed_normal(self):
        UL = conservative_from_primitive(1.0, 0.2, 1.0, self.gas)
        UR = conservative_from_primitive(0.5, -0.1, 0.4, self.gas)
        lam = max(float(max_wave_speed(UL, self.gas)), float(max_wave_speed(UR, self.gas)))
        forward = lax_friedrichs_flux(UL, UR, np.array([1.0]), lam, self.gas)
        backward = lax_friedrichs_flux(UR, UL, np.array([-1.0]), lam, self.gas)
        np.testing.assert_allclose(forward, -backward)

    def test_non_unit_normal_rejected(self):
        U = conservative_from_primitive(1.0, [0.0, 0.0], 1.0, self.gas)
        self.assertRaises(ContractViolationError, lax_friedrichs_flux, U, U, np.array([1.0, 1.0]), 10.0, self.gas)

    def test_too_small_dissipation_rejected(self):
        U = conservative_from_primitive(1.0, 0.0, 1.0, self.gas)
        self.assertRaises(ContractViolationError, lax_friedrichs_flux, U, U, np.array([1.0]), 0.5, self.gas)


class TestSpeedBounds(TestCase):
    gas = GasModel()

    def test_speed_bound_factor(self):
        self.assertAlmostEqual(speed_bound_factor(self.gas), 1.6)

    def test_combined_speed_bound(self):
        states = conservative_from_primitive(np.array([1.0, 0.5]), np.array([[0.1, 0.0], [0.0, -0.3]]),
                                             np.array([1.0, 0.2]), self.gas)
        bound = combined_speed_bound(states, np.array([0.25, 0.75]), self.gas)
        mixture = 0.25 * states[0] + 0.75 * states[1]
        self.assertGreaterEqual(bound, float(max_wave_speed(mixture, self.gas)))
        self.assertAlmostEqual(bound, 1.6 * float(max_wave_speed(states, self.gas).max()))

    def test_weights_must_be_convex(self):
        states = conservative_from_primitive(np.array([1.0, 0.5]), np.array([0.0, 0.0]), np.array([1.0, 1.0]),
                                             self.gas)
        self.assertRaises(ContractViolationError, combined_speed_bound, states, np.array([0.5, 0.6]), self.gas)
        self.assertRaises(ContractViolationError, combined_speed_bound, states, np.array([1.0]), self.gas)


def _random_states(rng: np.random.Generator, shape: tuple[int, ...], gas: GasModel) -> np.ndarray:
    rho = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=shape))
    velocity = rng.uniform(-5.0, 5.0, size=shape + (2,))
    p = np.exp(rng.uniform(np.log(1e-3), np.log(10.0), size=shape))
    return conservative_from_primitive(rho, velocity, p, gas)


class TestRandomStates(TestCase):
    gas = GasModel()

    def test_flux_consistency_and_reversal(self):
        rng = np.random.default_rng(3)
        UL = _random_states(rng, (1000,), self.gas)
        UR = _random_states(rng, (1000,), self.gas)
        angle = rng.uniform(0.0, 2.0 * np.pi, size=1000)
        normal = np.stack([np.cos(angle), np.sin(angle)], axis=-1)
        lam = np.maximum(max_wave_speed(UL, self.gas), max_wave_speed(UR, self.gas))

        same = lax_friedrichs_flux(UL, UL, normal, max_wave_speed(UL, self.gas), self.gas)
        np.testing.assert_allclose(same, normal_flux(UL, normal, self.gas), rtol=1e-12, atol=1e-12)
        forward = lax_friedrichs_flux(UL, UR, normal, lam, self.gas)
        backward = lax_friedrichs_flux(UR, UL, -normal, lam, self.gas)
        np.testing.assert_allclose(forward, -backward, rtol=1e-12, atol=1e-10)

    def test_speed_bound_of_mixtures(self):
        rng = np.random.default_rng(11)
        states = _random_states(rng, (100_000, 3), self.gas)
        weights = rng.dirichlet(np.ones(3), size=100_000)
        mixture = np.einsum("nk,nkv->nv", weights, states)
        bound = speed_bound_factor(self.gas) * max_wave_speed(states, self.gas).max(axis=1)
        self.assertTrue(np.all(max_wave_speed(mixture, self.gas) <= bound))
        for i in range(20):
            self.assertGreaterEqual(combined_speed_bound(states[i], weights[i], self.gas),
                                    float(max_wave_speed(mixture[i], self.gas)))

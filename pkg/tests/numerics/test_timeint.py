from unittest import TestCase

import numpy as np

from ebdg.errors import AdmissibilityError
from ebdg.numerics.timeint import SCHEME_NAMES, SCHEMES, Scheme, advance


def decay(u, t):
    return -u


class TestScheme(TestCase):

    def test_names_and_aliases(self):
        self.assertEqual(set(SCHEME_NAMES), set(SCHEMES))
        self.assertEqual(Scheme.from_name("rk4").kind, "rk4_classic")
        self.assertEqual(Scheme.from_name("ssprk3").kind, "ssprk33")
        self.assertEqual(Scheme.from_name("forward_euler").num_stages, 1)
        self.assertRaises(ValueError, Scheme.from_name, "rk45")

    def test_convexity(self):
        self.assertTrue(SCHEMES["forward_euler"].is_convex)
        self.assertTrue(SCHEMES["ssprk33"].is_convex)
        self.assertFalse(SCHEMES["rk4_classic"].is_convex)


class TestAdvance(TestCase):

    def test_stability_polynomials(self):
        dt = 0.1
        expected = {
            "forward_euler": 1.0 - dt,
            "ssprk33": 1.0 - dt + dt ** 2 / 2.0 - dt ** 3 / 6.0,
            "rk4_classic": 1.0 - dt + dt ** 2 / 2.0 - dt ** 3 / 6.0 + dt ** 4 / 24.0,
        }
        for name, value in expected.items():
            result, _ = advance(np.array([1.0]), dt, SCHEMES[name], decay)
            self.assertAlmostEqual(float(result[0]), value, places=14, msg=name)

    def test_stage_times(self):
        # u' = t is integrated exactly by both higher-order schemes
        for name in ("ssprk33", "rk4_classic"):
            result, initial = advance(np.array([0.0]), 0.5, SCHEMES[name], lambda u, t: np.full_like(u, t), t=1.0)
            self.assertAlmostEqual(float(result[0]), 0.625, places=14, msg=name)
            self.assertEqual(float(initial[0]), 1.0)

    def test_limiter_sees_every_stage(self):
        stages = []

        def limiter(values, stage):
            stages.append(stage)
            return values

        advance(np.array([1.0]), 0.1, SCHEMES["rk4_classic"], decay, limiter=limiter)
        self.assertEqual(stages, [1, 2, 3, 4])

    def test_failing_stage_is_reported(self):
        calls = []

        def residual(u, t):
            calls.append(t)
            if len(calls) == 2:
                raise AdmissibilityError("Non-positive pressure", element=3)
            return -u

        with self.assertRaises(AdmissibilityError) as context:
            advance(np.array([1.0]), 0.1, SCHEMES["ssprk33"], residual)
        self.assertEqual(context.exception.stage, 2)
        self.assertEqual(context.exception.element, 3)

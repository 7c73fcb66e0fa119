"""
Unit tests for gradients, Poisson brackets and the bracket-algebra suites
"""

import unittest

import numpy as np

from src.config import ModelConfig
from src.errors import IndexRangeError
from src.observables import (
    CanonicalMomentum,
    CharacteristicCoefficient,
    PowerTrace,
    PrincipalHamiltonian,
    TotalMomentum,
    WeightedTrace,
)
from src.phase_space import PhasePoint, sample_points
from src.poisson import (
    axioms_suite,
    bracket_of_gradients,
    bracket_scale,
    bracket_suite_18,
    bracket_suite_19,
    calibrate_kappa,
    finite_difference_gradient,
    gradient,
    index_pairs,
    invariant_jet,
    kappa_suite,
    poisson_bracket,
)

HAND = PhasePoint([1.0, -1.0], [0.0, 0.0])


class TestGradients(unittest.TestCase):

    def setUp(self):
        self.cfg = ModelConfig(n=3)
        self.point = sample_points(self.cfg, 1)[0]

    def test_dual_gradient_matches_finite_differences(self):
        for obs in (PowerTrace(2), PowerTrace(-1), WeightedTrace(2), PrincipalHamiltonian(), CharacteristicCoefficient(2)):
            exact = gradient(obs, self.point, self.cfg).row()
            approx = finite_difference_gradient(obs, self.point, self.cfg).row()
            np.testing.assert_allclose(exact, approx, rtol=1e-6, atol=1e-7, err_msg=obs.label)

    def test_batched_and_single_sweeps_agree(self):
        for obs in (PrincipalHamiltonian(), WeightedTrace(-2)):
            batched = gradient(obs, self.point, self.cfg, batched=True).row()
            single = gradient(obs, self.point, self.cfg, batched=False).row()
            np.testing.assert_allclose(batched, single, rtol=1e-13, atol=1e-14)

    def test_constant_has_zero_gradient(self):
        np.testing.assert_array_equal(gradient(PowerTrace(0), self.point, self.cfg).row(), np.zeros(6))

    def test_jet_matches_single_gradients(self):
        jet = invariant_jet(self.point, self.cfg, [1, 2])
        np.testing.assert_allclose(jet.grad_I1[2].row(), gradient(WeightedTrace(2), self.point, self.cfg).row(), rtol=1e-13)


class TestBrackets(unittest.TestCase):

    def test_hand_bracket(self):
        cfg = ModelConfig(n=2)
        self.assertAlmostEqual(poisson_bracket(WeightedTrace(1), PowerTrace(1), HAND, cfg), 3.0, places=9)
        literal = cfg.replace(convention="literal")
        self.assertAlmostEqual(poisson_bracket(WeightedTrace(1), PowerTrace(1), HAND, literal), 6.0, places=9)

    def test_self_bracket_is_exactly_zero(self):
        cfg = ModelConfig(n=3)
        point = sample_points(cfg, 1)[0]
        self.assertEqual(poisson_bracket(WeightedTrace(2), WeightedTrace(2), point, cfg), 0.0)

    def test_spectral_invariants_commute(self):
        cfg = ModelConfig(n=3)
        for point in sample_points(cfg, 5):
            for a, b in ((PowerTrace(1), PowerTrace(2)), (PrincipalHamiltonian(), PowerTrace(-2)), (TotalMomentum(), PowerTrace(3))):
                ga, gb = gradient(a, point, cfg), gradient(b, point, cfg)
                self.assertLess(abs(bracket_of_gradients(ga, gb)), 1e-10 * (1.0 + bracket_scale(ga, gb)))

    def test_canonical_momentum_translates_weighted_traces(self):
        for convention in ("half", "literal"):
            cfg = ModelConfig(n=3, convention=convention)
            point = sample_points(cfg, 1)[0]
            jet = invariant_jet(point, cfg, [-1, 1, 2])
            for k in (-1, 1, 2):
                bracket = poisson_bracket(WeightedTrace(k), CanonicalMomentum(), point, cfg)
                self.assertAlmostEqual(bracket / jet.I[k], 1.0, places=10)


class TestBracketSuites(unittest.TestCase):

    def test_bracket_suites_half(self):
        for n in (1, 2, 3, 4, 5):
            cfg = ModelConfig(n=n, samples=100)
            for suite in (bracket_suite_18, bracket_suite_19):
                record = suite(cfg)
                self.assertTrue(record.passed, f"{record.suite_id} n={n}: {record.max_residual}")
                self.assertEqual(record.findings, [])

    def test_literal_convention_is_a_finding(self):
        cfg = ModelConfig(n=2, samples=5, convention="literal")
        record = bracket_suite_18(cfg)
        self.assertTrue(record.passed)
        self.assertTrue(any("kappa=2.0" in f for f in record.findings))
        self.assertGreater(record.details["max_residual_kappa_one"], 1e-3)

    def test_explicit_pairs_outside_bound_rejected(self):
        with self.assertRaises(IndexRangeError):
            bracket_suite_18(ModelConfig(n=1, samples=2), pairs=[(3, 2)])

    def test_index_pairs_are_filtered(self):
        pairs = index_pairs(-2, 3, 1)
        self.assertIn((1, 3), pairs)
        self.assertNotIn((3, 3), pairs)
        self.assertTrue(all(abs(j) + abs(k) <= 4 for j, k in pairs))

    def test_calibration(self):
        half = calibrate_kappa(ModelConfig(n=2, samples=10))
        self.assertAlmostEqual(half.kappa, 1.0, delta=1e-8)
        literal = calibrate_kappa(ModelConfig(n=1, samples=10, convention="literal"))
        self.assertAlmostEqual(literal.kappa, 2.0, delta=1e-8)
        self.assertLess(literal.residual, 1e-8)

    def test_kappa_suite_finding(self):
        record, fit = kappa_suite(ModelConfig(n=2, samples=10, convention="literal"))
        self.assertTrue(record.passed)
        self.assertIn("kappa=2.0", record.findings)
        record, _ = kappa_suite(ModelConfig(n=2, samples=10))
        self.assertEqual(record.findings, [])

    def test_axioms(self):
        record = axioms_suite(ModelConfig(n=2), samples=2)
        self.assertTrue(record.passed, record.details)
        self.assertEqual(record.details["antisymmetry"], 0.0)


if __name__ == '__main__':
    unittest.main()

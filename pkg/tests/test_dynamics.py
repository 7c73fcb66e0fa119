"""
Unit tests for Hamiltonian flows, the linear law and scattering asymptotics
"""

import math
import unittest

import numpy as np

from src.config import ModelConfig
from src.dynamics import (
    StepControl,
    _vector_field,
    asymptotic_form_error,
    asymptotic_form_label,
    asymptotic_momenta,
    conserved_family_drift,
    fit_asymptotes,
    hamiltonian_flow,
    linearity_check,
    observable_drift,
    scattering_extract,
    spectrum_drift,
    trace_columns,
)
from src.errors import CollisionError, HorizonError
from src.observables import (
    CanonicalMomentum,
    PowerTrace,
    PrincipalHamiltonian,
    TotalMomentum,
    WeightedTrace,
)
from src.phase_space import PhasePoint, sample_points
from src.superint import c_family, k_family

HAND = PhasePoint([1.0, -1.0], [0.0, 0.0])
COARSE = StepControl(n_out=201)


class TestFlows(unittest.TestCase):

    def test_single_particle_power_trace_flow(self):
        cfg = ModelConfig(n=1)
        trajectory = hamiltonian_flow(PowerTrace(1), PhasePoint([0.3], [0.4]), cfg, 10.0, COARSE)
        # q' = e^p with p frozen
        self.assertAlmostEqual(trajectory.q[-1, 0], 0.3 + 10.0 * math.exp(0.4), places=7)
        self.assertAlmostEqual(trajectory.p[-1, 0], 0.4, places=12)

    def test_energy_is_conserved(self):
        cfg = ModelConfig(n=2)
        trajectory = hamiltonian_flow(PrincipalHamiltonian(), HAND, cfg, 50.0, COARSE)
        self.assertLess(trajectory.drift["obs"], 1e-8)
        self.assertFalse(trajectory.drift_exceeded)
        self.assertEqual(len(trajectory.times), 201)

    def test_canonical_momentum_is_a_rigid_translation(self):
        cfg = ModelConfig(n=3)
        start = sample_points(cfg, 1)[0]
        trajectory = hamiltonian_flow(CanonicalMomentum(), start, cfg, 5.0, COARSE)
        gaps = trajectory.q[:, :-1] - trajectory.q[:, 1:]
        np.testing.assert_allclose(gaps, np.tile(start.q[:-1] - start.q[1:], (len(trajectory.times), 1)), atol=1e-9)
        np.testing.assert_allclose(trajectory.q[-1] - start.q, 5.0, rtol=1e-9)
        self.assertLess(trajectory.max_drift, 1e-9)

    def test_momentum_flow_keeps_the_spectrum(self):
        cfg = ModelConfig(n=3)
        start = sample_points(cfg, 1)[0]
        trajectory = hamiltonian_flow(TotalMomentum(), start, cfg, 5.0, COARSE)
        self.assertLess(spectrum_drift(trajectory, cfg), 1e-8)
        self.assertLess(trajectory.max_drift, 1e-8)

    def test_frame_layout(self):
        cfg = ModelConfig(n=2)
        frame = hamiltonian_flow(PrincipalHamiltonian(), HAND, cfg, 1.0, StepControl(n_out=11)).to_frame()
        expected = ["t", "q_1", "q_2", "p_1", "p_2"] + trace_columns(2) + ["drift", "drift_exceeded"]
        self.assertEqual(list(frame.columns), expected)
        self.assertEqual(len(frame), 11)
        self.assertEqual(frame["drift"].iloc[0], 0.0)

    def test_non_positive_horizon_rejected(self):
        with self.assertRaises(ValueError):
            hamiltonian_flow(PrincipalHamiltonian(), HAND, ModelConfig(n=2), 0.0)

    def test_leaving_the_chamber_is_a_collision(self):
        rhs = _vector_field(PrincipalHamiltonian(), ModelConfig(n=2))
        with self.assertRaises(CollisionError):
            rhs(0.0, np.array([-1.0, 1.0, 0.0, 0.0]))


class TestLinearLaw(unittest.TestCase):

    def test_hand_point_slope(self):
        cfg = ModelConfig(n=2)
        result = linearity_check(PowerTrace(1), 1, HAND, cfg, 5.0, COARSE)
        self.assertTrue(result.passed, result.max_residual)
        self.assertAlmostEqual(result.slope, 3.0, places=6)
        self.assertAlmostEqual(result.bracket_slope, 3.0, places=9)
        self.assertAlmostEqual(result.formula_slope, 3.0, places=9)

    def test_literal_slope_doubles(self):
        cfg = ModelConfig(n=2, convention="literal")
        result = linearity_check(PowerTrace(1), 1, HAND, cfg, 2.0, COARSE)
        self.assertAlmostEqual(result.slope, result.formula_slope, places=5)

    def test_trivial_flow_has_zero_slope(self):
        result = linearity_check(PowerTrace(0), 1, HAND, ModelConfig(n=2), 3.0, COARSE)
        self.assertAlmostEqual(result.slope, 0.0, places=12)
        self.assertEqual(result.formula_slope, 0.0)

    def test_hamiltonian_slope_matches_bracket(self):
        cfg = ModelConfig(n=3)
        start = sample_points(cfg, 1)[0]
        result = linearity_check(PrincipalHamiltonian(), 2, start, cfg, 5.0, COARSE)
        self.assertTrue(result.passed)
        self.assertLess(result.slope_error, 1e-6)
        self.assertIsNone(result.formula_slope)

    def test_non_spectral_generator_rejected(self):
        with self.assertRaises(ValueError):
            linearity_check(WeightedTrace(1), 1, HAND, ModelConfig(n=2), 1.0)


class TestConservedFamilies(unittest.TestCase):

    def test_c_families_along_power_trace_flows(self):
        for n in (2, 3):
            cfg = ModelConfig(n=n)
            start = sample_points(cfg, 1)[0]
            for j in range(1, n + 1):
                trajectory = hamiltonian_flow(PowerTrace(j), start, cfg, 50.0, COARSE)
                families = [c_family(k, j) for k in range(1, n + 1) if k != j]
                drifts = conserved_family_drift(trajectory, families, cfg)
                self.assertLess(max(drifts.values()), 1e-6, f"n={n} I({j}): {drifts}")

    def test_hand_start_c_family(self):
        cfg = ModelConfig(n=2)
        trajectory = hamiltonian_flow(PowerTrace(1), PhasePoint([1.5, -1.0], [0.2, -0.1]), cfg, 50.0, COARSE)
        self.assertLess(observable_drift(trajectory, c_family(2, 1), cfg), 1e-6)

    def test_k_families_along_hamiltonian_flow(self):
        for n in (2, 3):
            cfg = ModelConfig(n=n)
            start = sample_points(cfg, 1)[0]
            trajectory = hamiltonian_flow(PrincipalHamiltonian(), start, cfg, 50.0, COARSE)
            drifts = conserved_family_drift(trajectory, [k_family(j) for j in range(2, n + 1)], cfg)
            self.assertLess(max(drifts.values()), 1e-6, f"n={n}: {drifts}")

    def test_k_family_labels(self):
        cfg = ModelConfig(n=3)
        start = sample_points(cfg, 1)[0]
        trajectory = hamiltonian_flow(PrincipalHamiltonian(), start, cfg, 10.0, COARSE)
        drifts = conserved_family_drift(trajectory, [k_family(2), k_family(3)], cfg)
        self.assertEqual(set(drifts), {"K(2)", "K(3)"})
        self.assertLess(max(drifts.values()), 1e-6)
        # the weighted traces themselves are not conserved
        self.assertGreater(observable_drift(trajectory, WeightedTrace(1), cfg), 1e-3)


class TestScattering(unittest.TestCase):

    def test_momentum_inversion(self):
        cfg = ModelConfig(n=1)
        velocities = 2 * cfg.scale * np.sinh(2 * cfg.scale * np.array([0.7, -0.2]))
        np.testing.assert_allclose(asymptotic_momenta(velocities, cfg), [0.7, -0.2], rtol=1e-14)

    def test_asymptote_fit_recovers_exact_model(self):
        t = np.linspace(10.0, 20.0, 50)
        q = np.column_stack([1.0 + 0.5 * t - 2.0 / t, -3.0 - 0.25 * t])
        a, v, residual = fit_asymptotes(t, q)
        np.testing.assert_allclose(a, [1.0, -3.0], atol=1e-10)
        np.testing.assert_allclose(v, [0.5, -0.25], atol=1e-12)
        self.assertLess(residual, 1e-10)

    def test_free_particle(self):
        cfg = ModelConfig(n=1)
        result = scattering_extract(PhasePoint([0.0], [0.6]), cfg, 20.0, COARSE)
        self.assertAlmostEqual(result.p_plus[0], 0.6, places=9)
        self.assertTrue(result.passed)

    def test_two_particles(self):
        cfg = ModelConfig(n=2)
        result = scattering_extract(PhasePoint([1.0, -1.0], [0.4, -0.4]), cfg, 200.0)
        self.assertTrue(result.passed, result.spectrum_match_error)
        self.assertGreater(result.final_min_gap, 50.0)
        self.assertIn("spectrum_match_error", result.to_dict())

    def test_three_particles(self):
        cfg = ModelConfig(n=3)
        result = scattering_extract(PhasePoint([2.0, 0.0, -2.0], [1.0, 0.0, -1.0]), cfg, 200.0)
        self.assertTrue(result.passed, result.spectrum_match_error)
        np.testing.assert_allclose(np.sort(np.exp(result.p_plus)), result.lax_spectrum, rtol=1e-5)

    def test_short_horizon_is_reported(self):
        with self.assertRaises(HorizonError) as ctx:
            scattering_extract(PhasePoint([1.0, -1.0], [0.4, -0.4]), ModelConfig(n=2), 5.0, COARSE)
        self.assertGreaterEqual(ctx.exception.residual, 0.0)

    def test_asymptotic_form_decays_quadratically(self):
        cfg = ModelConfig(n=2)
        p = [0.3, -0.2]
        near = asymptotic_form_error(PhasePoint([10.0, -10.0], p), cfg, 1)
        far = asymptotic_form_error(PhasePoint([20.0, -20.0], p), cfg, 1)
        self.assertAlmostEqual(near / far, 4.0, delta=0.01)
        self.assertEqual(asymptotic_form_label(cfg), "sum exp(k p_i)")
        self.assertEqual(asymptotic_form_label(cfg.replace(convention="literal")), "sum exp(2 k p_i)")


if __name__ == '__main__':
    unittest.main()

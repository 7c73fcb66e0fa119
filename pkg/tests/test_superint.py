"""
Unit tests for the extra constants of motion and the independence checks
"""

import unittest

import numpy as np

from src.config import ModelConfig
from src.errors import IndexRangeError
from src.invariant_algebra import block_determinant
from src.observables import PowerTrace, PrincipalHamiltonian, TotalMomentum, UserPolynomial, WeightedTrace
from src.phase_space import PhasePoint, sample_points
from src.superint import (
    FamilyKind,
    c_family,
    commutation_check,
    constants_suite,
    decoupled_jacobian_det,
    eval_constant,
    independence_rank,
    invariant_coordinate_det,
    jacobian_closed_form,
    jacobian_J,
    jacobian_in_invariant_coords,
    jacobian_suite,
    k_family,
    l_family,
    orthogonality_residual,
    rank_suite,
    spectral_jacobian_det,
    user_family,
    w_family,
)

HAND = PhasePoint([1.0, -1.0], [0.0, 0.0])


def cubic_user_family():
    """U = (I_3, -I_2) for n = 2 with I_3 written in I_1, I_2; the result is -C(2,1)."""
    u1 = UserPolynomial.from_table([(1.5, (1, 1)), (-0.5, (3, 0))], name="I_3")
    u2 = UserPolynomial.from_table([(-1.0, (0, 1))], name="-I_2")
    return user_family([u1, u2], PowerTrace(1))


class TestConstantFamilies(unittest.TestCase):

    def test_commutants(self):
        self.assertEqual(c_family(2, 1).commutant(), PowerTrace(1))
        self.assertEqual(k_family(2).commutant(), PrincipalHamiltonian())
        self.assertEqual(l_family(2).commutant(), TotalMomentum())
        self.assertIs(cubic_user_family().kind, FamilyKind.F)

    def test_index_ranges(self):
        cfg = ModelConfig(n=3)
        for fam in (c_family(1, 1), c_family(4, 1), k_family(1), l_family(4)):
            with self.assertRaises(IndexRangeError):
                fam.validate(cfg)
        with self.assertRaises(IndexRangeError):
            user_family([], PowerTrace(1)).validate(cfg)
        with self.assertRaises(IndexRangeError):
            w_family(1, 2, WeightedTrace(1)).validate(cfg)

    def test_hand_values(self):
        cfg = ModelConfig(n=2)
        # C(2,1) = I1_2 I_2 - I1_1 I_3 with I1_1 = 0 at the hand point
        c = eval_constant(c_family(2, 1), HAND, cfg)
        I1_2 = WeightedTrace(2).value(HAND, cfg)
        self.assertAlmostEqual(c, 3.0 * I1_2, places=9)

    def test_commutation_of_all_families(self):
        for convention in ("half", "literal"):
            cfg = ModelConfig(n=3, samples=5, convention=convention)
            for fam in (c_family(2, 1), c_family(1, 3), k_family(2), k_family(3), l_family(2), l_family(3)):
                record = commutation_check(fam, cfg)
                self.assertTrue(record.passed, f"{fam.label} [{convention}]: {record.max_residual}")
                self.assertEqual(record.details["self_bracket"], 0.0)

    def test_user_family(self):
        cfg = ModelConfig(n=2, samples=5)
        fam = cubic_user_family()
        for point in sample_points(cfg, 3):
            self.assertAlmostEqual(eval_constant(fam, point, cfg) / eval_constant(c_family(2, 1), point, cfg), -1.0, places=9)
            self.assertLess(orthogonality_residual(fam, point, cfg), 1e-12)
        self.assertTrue(commutation_check(fam, cfg).passed)

    def test_bracket_built_family(self):
        cfg = ModelConfig(n=3, samples=4)
        for invariant in (PrincipalHamiltonian(), PowerTrace(2)):
            record = commutation_check(w_family(1, 2, invariant), cfg)
            self.assertTrue(record.passed, f"{invariant.label}: {record.max_residual}")

    def test_constants_suite(self):
        self.assertTrue(constants_suite(ModelConfig(n=2, samples=3)).passed)
        self.assertTrue(constants_suite(ModelConfig(n=1)).skipped)


class TestJacobians(unittest.TestCase):

    def test_decoupled_limit(self):
        cfg = ModelConfig(n=3)
        point = PhasePoint([400.0, 0.0, -400.0], [0.3, -0.2, 0.5])
        det = jacobian_J(point, cfg).det
        self.assertAlmostEqual(det / decoupled_jacobian_det(point, cfg), 1.0, places=3)

    def test_single_particle(self):
        cfg = ModelConfig(n=1)
        point = PhasePoint([0.4], [0.3])
        # d(I_1, I_1^1)/d(p, q) = e^p * e^p
        self.assertAlmostEqual(jacobian_J(point, cfg).det, np.exp(0.6), places=12)
        self.assertAlmostEqual(decoupled_jacobian_det(point, cfg), np.exp(0.6), places=12)

    def test_hand_point_closed_form(self):
        # eigenvalues (sqrt5 +- 1) / 2: product 1, difference 1, so |det J| = 1 * 2! * 1 * 1
        result = jacobian_J(HAND, ModelConfig(n=2))
        self.assertAlmostEqual(abs(result.det), 2.0, places=9)
        self.assertAlmostEqual(spectral_jacobian_det(HAND, ModelConfig(n=2)), 2.0, places=12)

    def test_spectral_closed_form_at_random_points(self):
        for convention in ("half", "literal"):
            for n in (2, 3):
                cfg = ModelConfig(n=n, convention=convention)
                for point in sample_points(cfg, 10):
                    self.assertAlmostEqual(jacobian_J(point, cfg).ratio, 1.0, delta=1e-6)

    def test_genericity_suite(self):
        for convention in ("half", "literal"):
            for n in (2, 3, 4):
                record = jacobian_suite(ModelConfig(n=n, samples=100, convention=convention))
                self.assertTrue(record.passed, f"n={n} [{convention}]: {record.details}")
                self.assertEqual(record.details["fraction_generic"], 1.0)

    def test_hand_point_closed_forms(self):
        cfg = ModelConfig(n=2)
        self.assertAlmostEqual(invariant_coordinate_det("C", 1, HAND, cfg).det, 3.0, places=10)
        self.assertAlmostEqual(invariant_coordinate_det("K", 1, HAND, cfg).det, 1.0, places=10)

    def test_closed_forms_at_random_points(self):
        for n in (2, 3, 4, 5):
            cfg = ModelConfig(n=n, samples=50)
            for j in range(1, n + 1):
                record = jacobian_in_invariant_coords("C", cfg, j=j)
                self.assertTrue(record.passed, f"C j={j} n={n}: {record.max_residual}")
            self.assertTrue(jacobian_in_invariant_coords("K", cfg).passed)

    def test_block_determinant(self):
        matrix = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1e8, -3e7, 2.5]])
        self.assertEqual(block_determinant(matrix, 2), 2.5)
        general = np.array([[2.0, 1.0, 0.5], [1.0, 3.0, 0.0], [4.0, 1.0, 1.0]])
        self.assertAlmostEqual(block_determinant(general, 2), np.linalg.det(general), places=12)

    def test_closed_form_of_single_value(self):
        self.assertAlmostEqual(jacobian_closed_form(np.array([3.0]), ModelConfig(n=1, convention="literal")), 18.0)

    def test_k_mode_needs_two_particles(self):
        self.assertTrue(jacobian_in_invariant_coords("K", ModelConfig(n=1)).skipped)
        with self.assertRaises(IndexRangeError):
            jacobian_in_invariant_coords("C", ModelConfig(n=2), j=3)


class TestIndependence(unittest.TestCase):

    def setUp(self):
        self.cfg = ModelConfig(n=3)
        self.point = sample_points(self.cfg, 1)[0]

    def test_full_rank_coordinates(self):
        observables = [PowerTrace(a) for a in (1, 2, 3)] + [WeightedTrace(a) for a in (1, 2, 3)]
        self.assertEqual(independence_rank(observables, self.point, self.cfg).rank, 6)

    def test_superintegrable_set(self):
        observables = [PowerTrace(a) for a in (1, 2, 3)] + [c_family(2, 1), c_family(3, 1)]
        self.assertEqual(independence_rank(observables, self.point, self.cfg).rank, 5)

    def test_dependent_set(self):
        observables = [PowerTrace(1), PowerTrace(2), PowerTrace(3), PowerTrace(4)]
        self.assertEqual(independence_rank(observables, self.point, self.cfg).rank, 3)

    def test_too_many_observables(self):
        with self.assertRaises(ValueError):
            independence_rank([PowerTrace(k) for k in range(1, 8)], self.point, self.cfg)

    def test_rank_suite(self):
        self.assertTrue(rank_suite(ModelConfig(n=2, samples=10)).passed)


if __name__ == '__main__':
    unittest.main()

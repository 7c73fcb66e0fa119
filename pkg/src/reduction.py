"""
Gauge-slice audit of the symplectic reduction: builds (g, J^R, xi) from a
phase-space point and checks the moment-map constraints and the restriction
of the invariant functions.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from src.config import ModelConfig
from src.errors import EigenDecompositionError, IndexRangeError
from src.lax import build_lax_generic, lax_powers_generic, spectral_sums
from src.phase_space import PhasePoint, make_generator, sample_points
from src.report import SuiteRecord

ANCHOR_SLICE = "gauge slice: g = L^(1/2), moment-map constraints, invariant restriction"

EIGEN_CLAMP = 1e-14
SLICE_TOL = 1e-9


@dataclass(frozen=True)
class SlicePoint:
    """(g, J^R, xi) on the gauge slice plus the orbit vector v."""

    g: np.ndarray
    JR: np.ndarray
    xi: np.ndarray
    v: np.ndarray
    L: np.ndarray
    u: np.ndarray

    @property
    def n(self) -> int:
        return self.g.shape[0]


def anti_hermitian(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X - X.conj().T)


def hermitian_sqrt(M: np.ndarray, clamp: float = EIGEN_CLAMP) -> Tuple[np.ndarray, np.ndarray]:
    """
    M^(1/2) and M^(-1/2) of a Hermitian positive definite matrix through its
    eigendecomposition; eigenvalues are clamped at `clamp` against roundoff.
    """
    try:
        evals, evecs = np.linalg.eigh(M)
    except np.linalg.LinAlgError as e:
        raise EigenDecompositionError(f"Hermitian eigendecomposition failed: {e}") from e
    if evals.min() < clamp:
        logging.warning(f"Clamping eigenvalue {evals.min():.3e} to {clamp:.0e} in the matrix square root")
    root = np.sqrt(np.maximum(evals, clamp))
    sqrt_m = (evecs * root) @ evecs.conj().T
    inv_sqrt_m = (evecs / root) @ evecs.conj().T
    return sqrt_m, inv_sqrt_m


def build_slice_point(point: PhasePoint, cfg: ModelConfig) -> SlicePoint:
    """g = L^(1/2), v = L^(-1/2) u, J^R = -2 diag(q), xi = i chi (1 - v v^dagger)."""
    point.validate(cfg)
    L, u = build_lax_generic(point.q, point.p, cfg)
    g, g_inv = hermitian_sqrt(L)
    v = g_inv @ u
    JR = -2.0 * np.diag(point.q).astype(complex)
    xi = 1j * cfg.chi * (np.eye(cfg.n) - np.outer(v, v.conj()))
    return SlicePoint(g=g, JR=JR, xi=xi, v=v, L=L, u=u)


@dataclass(frozen=True)
class ConstraintResidual:
    first: float
    second: float


def constraint_check(sp: SlicePoint, cfg: ModelConfig) -> ConstraintResidual:
    """
    First constraint: anti-Hermitian part of J^R (exactly zero). Second:
    anti-Hermitian part of g J^R g^-1 plus xi.
    """
    first = float(np.max(np.abs(anti_hermitian(sp.JR))))
    _, g_inv = hermitian_sqrt(sp.L)
    second = float(np.max(np.abs(anti_hermitian(sp.g @ sp.JR @ g_inv) + sp.xi)))
    return ConstraintResidual(first, second)


def slice_diagnostics(sp: SlicePoint, cfg: ModelConfig) -> Dict[str, float]:
    """Deviations of the slice-point invariants: square root, orbit norm and xi spectrum."""
    n = sp.n
    # -i xi is Hermitian with eigenvalues chi (1 - n) once and chi (n - 1 times)
    expected = np.sort(np.array([cfg.chi * (1 - n)] + [cfg.chi] * (n - 1)))
    observed = np.sort(np.linalg.eigvalsh(-1j * sp.xi))
    return {
        "sqrt": float(np.max(np.abs(sp.g @ sp.g - sp.L))),
        "g_hermitian": float(np.max(np.abs(sp.g - sp.g.conj().T))),
        "orbit_norm": float(abs(np.vdot(sp.v, sp.v).real - n)),
        "xi_anti_hermitian": float(np.max(np.abs(sp.xi + sp.xi.conj().T))),
        "xi_spectrum": float(np.max(np.abs(observed - expected))),
    }


@dataclass(frozen=True)
class RestrictionResidual:
    trace: float
    weighted: float
    trace_value: float
    weighted_value: float


def invariant_restriction_check(point: PhasePoint, cfg: ModelConfig, k: int) -> RestrictionResidual:
    """tr((g^dagger g)^k) against I_k and -1/2 Re tr((g^dagger g)^k J^R) against I_k^1."""
    if abs(k) > cfg.n:
        raise IndexRangeError(f"restriction check requires k in [-{cfg.n}, {cfg.n}], got {k}")
    sp = build_slice_point(point, cfg)
    power = lax_powers_generic(sp.g.conj().T @ sp.g, [k])[k]
    trace_value = float(np.trace(power).real)
    weighted_value = float(-0.5 * np.trace(power @ sp.JR).real)
    I, I1 = spectral_sums(point, cfg, [k])
    return RestrictionResidual(
        trace=abs(trace_value - I[k]) / max(1.0, abs(I[k])),
        weighted=abs(weighted_value - I1[k]) / max(1.0, abs(I1[k])),
        trace_value=trace_value,
        weighted_value=weighted_value,
    )


def reduction_suite(cfg: ModelConfig, samples: Optional[int] = None, rng=None) -> SuiteRecord:
    """Slice invariants, constraints and invariant restrictions over sampled points."""
    rng = make_generator(cfg.seed) if rng is None else rng
    points = sample_points(cfg, cfg.samples if samples is None else samples, rng)
    worst: Dict[str, float] = {}
    for point in points:
        sp = build_slice_point(point, cfg)
        values = slice_diagnostics(sp, cfg)
        constraints = constraint_check(sp, cfg)
        values["constraint_first"] = constraints.first
        values["constraint_second"] = constraints.second
        for k in range(-cfg.n, cfg.n + 1):
            r = invariant_restriction_check(point, cfg, k)
            values["restriction_trace"] = max(values.get("restriction_trace", 0.0), r.trace)
            values["restriction_weighted"] = max(values.get("restriction_weighted", 0.0), r.weighted)
        for key, value in values.items():
            worst[key] = max(worst.get(key, 0.0), value)
    max_residual = max(worst.values())
    record = SuiteRecord(
        suite_id="reduction_audit",
        anchor=ANCHOR_SLICE,
        samples=len(points),
        max_residual=max_residual,
        tolerance=SLICE_TOL,
        passed=max_residual < SLICE_TOL and worst["constraint_first"] == 0.0,
        details=worst,
    )
    logging.info(f"Suite reduction_audit: max residual {max_residual:.3e} over {len(points)} points.")
    return record

"""
Verification driver: runs every suite, bounded by a job semaphore, and
collects the records into one report.
"""

import asyncio
import logging
import math
import time
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.config import ModelConfig, config_to_dict
from src.dynamics import (
    StepControl,
    asymptotic_form_error,
    asymptotic_form_label,
    conserved_family_drift,
    hamiltonian_flow,
    linearity_check,
    scattering_extract,
    spectrum_drift,
)
from src.invariant_algebra import block_determinant, evaluate_jacobian
from src.lax import build_lax, hamiltonian_identity, lax_power_trace, principal_hamiltonian, weighted_trace
from src.observables import PowerTrace, PrincipalHamiltonian, WeightedTrace
from src.phase_space import PhasePoint, make_generator, sample_points
from src.poisson import axioms_suite, bracket_suite_18, bracket_suite_19, kappa_suite, poisson_bracket
from src.reduction import reduction_suite
from src.report import SuiteRecord, VerificationReport, skipped_record
from src.superint import (
    c_family,
    constants_suite,
    decoupled_jacobian_det,
    jacobian_J,
    jacobian_in_invariant_coords,
    jacobian_suite,
    k_family,
    rank_suite,
)

ANCHOR_LAX = "L Hermitian positive definite with diagonal u_j^2"
ANCHOR_17 = "h = (I_1 + I_-1) / 2 = sum cosh(2 s p_k) f_k(q)"
ANCHOR_HAND = "closed-form values at n=2, q=(1,-1), p=(0,0), chi=1"
ANCHOR_FLOW = "conservation, isospectrality and linear I_1^1 along the h-flow"
ANCHOR_CONSERVED = "C(k, j) conserved along the I_j-flow, K(j) along the h-flow"
ANCHOR_SCATTER = "sorted exp(2 s p_i^+) equal the Lax spectrum"

HAND_TOL = 1e-9
IDENTITY_TOL = 1e-10
FLOW_T_END = 50.0
SCATTER_T_END = 200.0


def hand_point() -> PhasePoint:
    return PhasePoint([1.0, -1.0], [0.0, 0.0])


def lax_suite(cfg: ModelConfig, samples: Optional[int] = None, rng=None) -> SuiteRecord:
    """Hermiticity, positivity, diagonal u_j^2 and traces against eigenvalue power sums."""
    rng = make_generator(cfg.seed) if rng is None else rng
    points = sample_points(cfg, cfg.samples if samples is None else samples, rng)
    hermitian = diagonal = spectral = 0.0
    min_eigenvalue = math.inf
    for point in points:
        lax = build_lax(point, cfg)
        evals = lax.eigenvalues()
        hermitian = max(hermitian, lax.hermiticity_residual())
        diagonal = max(diagonal, float(np.max(np.abs(np.diagonal(lax.entries) - lax.u ** 2))))
        min_eigenvalue = min(min_eigenvalue, float(evals.min()))
        for k in range(-cfg.n, cfg.n + 1):
            expected = float(np.sum(evals ** k))
            spectral = max(spectral, abs(float(lax_power_trace(point, cfg, k)) - expected) / max(1.0, abs(expected)))
    residual = max(hermitian, diagonal, spectral)
    return SuiteRecord(
        suite_id="lax_properties",
        anchor=ANCHOR_LAX,
        samples=len(points),
        max_residual=residual,
        tolerance=cfg.tol.abs_tol,
        passed=residual < cfg.tol.abs_tol and min_eigenvalue > 0,
        details={"hermiticity": hermitian, "diagonal": diagonal, "trace_vs_spectrum": spectral,
                 "min_eigenvalue": min_eigenvalue},
    )


def identity_17_suite(cfg: ModelConfig, samples: Optional[int] = None, rng=None) -> SuiteRecord:
    """
    Lax-based h against the cosh sum. The check uses the cosh argument that
    matches the convention; a mismatch with the plain cosh(p_k) form is a finding.
    """
    rng = make_generator(cfg.seed) if rng is None else rng
    points = sample_points(cfg, cfg.samples if samples is None else samples, rng)
    matched = direct = 0.0
    for point in points:
        result = hamiltonian_identity(point, cfg)
        scale = max(1.0, abs(result.lax_value))
        matched = max(matched, result.matched_residual / scale)
        direct = max(direct, result.residual / scale)
    record = SuiteRecord(
        suite_id="identity_17",
        anchor=ANCHOR_17,
        samples=len(points),
        max_residual=matched,
        tolerance=IDENTITY_TOL,
        passed=matched < IDENTITY_TOL,
        details={"cosh_p_residual": direct, "cosh_matched_residual": matched},
    )
    if direct >= IDENTITY_TOL:
        record.findings.append(
            f"h from the Lax matrix differs from sum cosh(p_k) f_k by up to {direct:.3e} (relative) "
            f"under convention={cfg.convention.value}"
        )
    return record


def hand_point_suite(cfg: ModelConfig) -> SuiteRecord:
    """Closed-form values at n=2, q=(1,-1), p=(0,0), chi=1."""
    hand_cfg = cfg.replace(n=2, chi=1.0, gap_floor=None)
    point = hand_point()
    sqrt5 = math.sqrt(5.0)
    lax = build_lax(point, hand_cfg)
    I = {k: float(lax_power_trace(point, hand_cfg, k)) for k in (1, 2, 3, -1)}
    I1 = {k: float(weighted_trace(point, hand_cfg, k)) for k in (1, 2)}
    c_matrix = evaluate_jacobian(2, "C", 1, [I[1], I[2]], [I1[1], I1[2]])
    k_matrix = evaluate_jacobian(2, "K", 1, [I[1], I[2]], [I1[1], I1[2]])
    checks = {
        "I_1": (I[1], sqrt5),
        "I_2": (I[2], 3.0),
        "I_3": (I[3], 2 * sqrt5),
        "I_-1": (I[-1], sqrt5),
        "det_L": (float(np.linalg.det(lax.entries).real), 1.0),
        "h": (principal_hamiltonian(point, hand_cfg), sqrt5),
        "I1_1": (I1[1], 0.0),
        "bracket_I1_1_I_1": (poisson_bracket(WeightedTrace(1), PowerTrace(1), point, hand_cfg), 3.0 * hand_cfg.kappa),
        "det_C_1": (block_determinant(c_matrix, 2), 3.0),
        "det_K": (block_determinant(k_matrix, 2), 1.0),
    }
    errors = {name: abs(value - expected) for name, (value, expected) in checks.items()}
    worst = max(errors.values())
    return SuiteRecord(
        suite_id="hand_point",
        anchor=ANCHOR_HAND,
        samples=1,
        max_residual=worst,
        tolerance=HAND_TOL,
        passed=worst < HAND_TOL,
        details={name: {"value": checks[name][0], "expected": checks[name][1]} for name in checks},
    )


def flow_suite(cfg: ModelConfig, rng=None, t_end: float = FLOW_T_END) -> SuiteRecord:
    """Short h-flow from a sampled point: conservation, isospectrality and the linear law for I_1^1."""
    rng = make_generator(cfg.seed) if rng is None else rng
    start = sample_points(cfg, 1, rng)[0]
    control = StepControl(n_out=201)
    trajectory = hamiltonian_flow(PrincipalHamiltonian(), start, cfg, t_end, control)
    iso = spectrum_drift(trajectory, cfg)
    linear = linearity_check(PrincipalHamiltonian(), 1, start, cfg, t_end, control)
    residual = max(trajectory.max_drift, iso)
    passed = residual < cfg.tol.drift_tol and linear.passed and linear.slope_error < 1e-7
    return SuiteRecord(
        suite_id="flow_conservation",
        anchor=ANCHOR_FLOW,
        samples=1,
        max_residual=residual,
        tolerance=cfg.tol.drift_tol,
        passed=passed,
        details={"max_drift": trajectory.max_drift, "spectrum_drift": iso, "line_residual": linear.max_residual,
                 "line_tolerance": linear.tolerance, "slope_error": linear.slope_error, "t_end": t_end},
    )


def constants_flow_suite(cfg: ModelConfig, rng=None, t_end: float = FLOW_T_END) -> SuiteRecord:
    """C(k, j) along every I_j-flow and K(j) along the h-flow from one sampled start."""
    n = cfg.n
    if n < 2:
        return skipped_record("constants_conservation", ANCHOR_CONSERVED, "no extra constants for n=1")
    rng = make_generator(cfg.seed) if rng is None else rng
    start = sample_points(cfg, 1, rng)[0]
    control = StepControl(n_out=201)
    flows = [(PowerTrace(j), [c_family(k, j) for k in range(1, n + 1) if k != j]) for j in range(1, n + 1)]
    flows.append((PrincipalHamiltonian(), [k_family(j) for j in range(2, n + 1)]))
    drifts = {}
    for generator, families in flows:
        trajectory = hamiltonian_flow(generator, start, cfg, t_end, control)
        for label, drift in conserved_family_drift(trajectory, families, cfg).items():
            drifts[f"{label}|{generator.label}"] = drift
    worst = max(drifts.values())
    return SuiteRecord(
        suite_id="constants_conservation",
        anchor=ANCHOR_CONSERVED,
        samples=1,
        max_residual=worst,
        tolerance=cfg.tol.drift_tol,
        passed=worst < cfg.tol.drift_tol,
        details={"t_end": t_end, "drift": drifts},
    )


def scattering_start(cfg: ModelConfig, rng) -> PhasePoint:
    """Sampled gaps with momenta spread evenly from p_max down to -p_max, so every pair separates."""
    base = sample_points(cfg, 1, rng)[0]
    return PhasePoint(base.q, np.linspace(cfg.ranges.p_max, -cfg.ranges.p_max, cfg.n))


def scattering_suite(cfg: ModelConfig, rng=None, t_end: float = SCATTER_T_END) -> SuiteRecord:
    """
    Asymptotic momenta against the initial Lax spectrum. The decoupled forms of
    I_k and of det J at the final state are recorded alongside.
    """
    rng = make_generator(cfg.seed) if rng is None else rng
    start = scattering_start(cfg, rng)
    result = scattering_extract(start, cfg, t_end)
    final = result.final_state
    form = {}
    for k in range(1, cfg.n + 1):
        scale = float(np.sum(np.exp(2.0 * cfg.scale * k * final.p)))
        form[f"I_{k}"] = asymptotic_form_error(final, cfg, k) / scale
    decoupled = decoupled_jacobian_det(final, cfg)
    return SuiteRecord(
        suite_id="scattering",
        anchor=ANCHOR_SCATTER,
        samples=1,
        max_residual=result.spectrum_match_error,
        tolerance=result.tolerance,
        passed=result.passed,
        details={
            "t_end": t_end,
            "final_min_gap": result.final_min_gap,
            "fit_residual": result.fit_residual,
            "asymptotic_form": asymptotic_form_label(cfg),
            "asymptotic_form_error": form,
            "decoupled_jacobian_deviation": abs(abs(jacobian_J(final, cfg).det) / decoupled - 1.0),
        },
    )


SuiteFactory = Callable[[], SuiteRecord]


def suite_plan(cfg: ModelConfig) -> List[Tuple[str, SuiteFactory]]:
    """Every suite of a verify run, in report order."""
    plan: List[Tuple[str, SuiteFactory]] = [
        ("lax_properties", lambda: lax_suite(cfg)),
        ("identity_17", lambda: identity_17_suite(cfg)),
        ("hand_point", lambda: hand_point_suite(cfg)),
        ("bracket_18", lambda: bracket_suite_18(cfg)),
        ("bracket_19", lambda: bracket_suite_19(cfg)),
        ("bracket_axioms", lambda: axioms_suite(cfg)),
        ("jacobian_J", lambda: jacobian_suite(cfg)),
        ("jacobian_K", lambda: jacobian_in_invariant_coords("K", cfg)),
        ("independence_rank", lambda: rank_suite(cfg)),
        ("constants_commute", lambda: constants_suite(cfg)),
        ("reduction_audit", lambda: reduction_suite(cfg)),
        ("flow_conservation", lambda: flow_suite(cfg)),
        ("constants_conservation", lambda: constants_flow_suite(cfg)),
        ("scattering", lambda: scattering_suite(cfg)),
    ]
    for j in range(1, cfg.n + 1):
        plan.append((f"jacobian_C_{j}", lambda j=j: jacobian_in_invariant_coords("C", cfg, j=j)))
    return plan


def _failed_record(suite_id: str, error: Exception) -> SuiteRecord:
    return SuiteRecord(suite_id, "", 0, math.inf, 0.0, False, findings=[f"error: {type(error).__name__}: {error}"])


async def _run_suite(name: str, factory: SuiteFactory, semaphore: asyncio.Semaphore) -> SuiteRecord:
    async with semaphore:
        logging.info(f"Starting suite {name}")
        started = time.perf_counter()
        try:
            record = await asyncio.to_thread(factory)
        except Exception as e:
            logging.error(f"Suite {name} raised {type(e).__name__}: {e}")
            record = _failed_record(name, e)
        record.seconds = time.perf_counter() - started
        status = "skipped" if record.skipped else ("passed" if record.passed else "FAILED")
        logging.info(f"Suite {name} {status}: max residual {record.max_residual:.3e} in {record.seconds:.2f}s")
        return record


async def run_verification(cfg: ModelConfig, jobs: int = 1) -> VerificationReport:
    """
    Runs the kappa calibration and every planned suite with at most `jobs`
    suites in flight.

    Args:
        cfg (ModelConfig): Model configuration.
        jobs (int): Maximum number of concurrently running suites.

    Returns:
        VerificationReport: All records plus the kappa calibration result.
    """
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    started = time.perf_counter()
    semaphore = asyncio.Semaphore(jobs)
    kappa_holder = {}

    def calibration() -> SuiteRecord:
        record, fit = kappa_suite(cfg)
        kappa_holder.update({"kappa": fit.kappa, "fit_residual": fit.residual, "rows": fit.rows, "expected": fit.expected})
        return record

    plan = [("kappa_calibration", calibration)] + suite_plan(cfg)
    records = await asyncio.gather(*(_run_suite(name, factory, semaphore) for name, factory in plan))
    report = VerificationReport(
        config=config_to_dict(cfg),
        suites=list(records),
        kappa=kappa_holder,
        include_timing=cfg.include_timing,
        total_seconds=time.perf_counter() - started,
    )
    logging.info(f"Verification {'passed' if report.passed else 'FAILED'}: {len(records)} suites, {len(report.findings)} finding(s).")
    for finding in report.findings:
        logging.info(f"Finding - {finding}")
    return report

"""
Hamiltonian flows of registry observables, the linear law for I_k^1 along
spectral flows, and scattering asymptotics.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from src.config import ModelConfig
from src.errors import CollisionError, HorizonError, SingularConfigurationError, StiffnessError
from src.lax import build_lax_generic, spectral_sums
from src.observables import Observable, PowerTrace, PrincipalHamiltonian, WeightedTrace
from src.phase_space import PhasePoint
from src.poisson import gradient, poisson_bracket


# the asymptote fit uses the tail of the trajectory
FIT_WINDOW = 0.2
SEPARATION_FACTOR = 50.0


@dataclass(frozen=True)
class StepControl:
    """Integrator settings: DOP853 tolerances, max step and number of output samples."""

    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = np.inf
    n_out: int = 1001

    def output_times(self, t_end: float) -> np.ndarray:
        return np.linspace(0.0, t_end, max(self.n_out, 2))


def trace_columns(n: int) -> List[str]:
    return [f"I_{k}" for k in range(-n, n + 1)] + [f"I_{k}^1" for k in range(-n, n + 1)]


def _relative_deviation(values: np.ndarray) -> np.ndarray:
    ref = values[0]
    return np.abs(values - ref) / max(1.0, abs(ref))


@dataclass(frozen=True)
class Trajectory:
    """
    Sampled solution of one flow. `tracked` holds the flow observable and
    every I_k, I_k^1 for k in [-n, n] per output time; `drift` the max
    relative deviation of each conserved column from its initial value.
    """

    observable: str
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    tracked: pd.DataFrame
    drift: Dict[str, float]
    drift_tol: float
    row_drift: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.q.shape[1]

    @property
    def max_drift(self) -> float:
        return max(self.drift.values()) if self.drift else 0.0

    @property
    def drift_exceeded(self) -> bool:
        return self.max_drift >= self.drift_tol

    def state(self, i: int) -> PhasePoint:
        return PhasePoint(self.q[i], self.p[i])

    def states(self) -> List[PhasePoint]:
        return [self.state(i) for i in range(len(self.times))]

    def to_frame(self) -> pd.DataFrame:
        """Columns t, q_i, p_i, I_k, I_k^1, drift and drift_exceeded (0/1)."""
        n = self.n
        frame = pd.DataFrame({"t": self.times})
        for i in range(n):
            frame[f"q_{i + 1}"] = self.q[:, i]
        for i in range(n):
            frame[f"p_{i + 1}"] = self.p[:, i]
        for column in trace_columns(n):
            frame[column] = self.tracked[column].to_numpy()
        frame["drift"] = self.row_drift
        frame["drift_exceeded"] = (self.row_drift >= self.drift_tol).astype(int)
        return frame


def _vector_field(obs: Observable, cfg: ModelConfig):
    def rhs(t, z):
        try:
            point = PhasePoint.from_vector(z).validate(cfg)
        except SingularConfigurationError as e:
            raise CollisionError(f"{obs.label} flow left the Weyl chamber at t={t:.6g}: {e}") from e
        g = gradient(obs, point, cfg)
        return np.concatenate([g.dp, -g.dq])

    return rhs


def _tracked_frame(obs: Observable, q: np.ndarray, p: np.ndarray, cfg: ModelConfig) -> pd.DataFrame:
    n = cfg.n
    ks = range(-n, n + 1)
    rows = []
    for qi, pi in zip(q, p):
        point = PhasePoint(qi, pi)
        I, I1 = spectral_sums(point, cfg, ks)
        row = {f"I_{k}": I[k] for k in ks}
        row.update({f"I_{k}^1": I1[k] for k in ks})
        row["obs"] = obs.value(point, cfg)
        rows.append(row)
    return pd.DataFrame(rows)


def hamiltonian_flow(obs: Observable, start: PhasePoint, cfg: ModelConfig, t_end: float,
                     control: Optional[StepControl] = None) -> Trajectory:
    """
    Integrates q' = d obs/dp, p' = -d obs/dq from `start` up to t_end.

    Args:
        obs (Observable): The generating function of the flow.
        start (PhasePoint): Initial point inside the Weyl chamber.
        cfg (ModelConfig): Model configuration.
        t_end (float): Final time (> 0).
        control (StepControl, optional): Integrator settings.

    Returns:
        Trajectory: Sampled states, tracked invariants and drift diagnostics.
    """
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    control = control or StepControl()
    obs.validate(cfg)
    start.validate(cfg)
    times = control.output_times(t_end)
    sol = solve_ivp(
        _vector_field(obs, cfg),
        (0.0, t_end),
        start.as_vector(),
        method="DOP853",
        t_eval=times,
        rtol=control.rtol,
        atol=control.atol,
        max_step=control.max_step,
    )
    if sol.status < 0:
        if "step size" in sol.message.lower():
            raise StiffnessError(f"{obs.label} flow: {sol.message}")
        raise RuntimeError(f"{obs.label} flow failed: {sol.message}")
    n = cfg.n
    q, p = sol.y[:n].T.copy(), sol.y[n:].T.copy()
    if np.any(q[:, :-1] - q[:, 1:] < cfg.gap_floor):
        raise CollisionError(f"{obs.label} flow violated the Weyl-chamber ordering")
    tracked = _tracked_frame(obs, q, p, cfg)

    conserved = [c for c in tracked.columns if c.startswith("I_") and not c.endswith("^1")] + ["obs"]
    deviations = {c: _relative_deviation(tracked[c].to_numpy()) for c in conserved}
    drift = {c: float(np.max(d)) for c, d in deviations.items()}
    row_drift = np.max(np.vstack(list(deviations.values())), axis=0)
    trajectory = Trajectory(obs.label, sol.t.copy(), q, p, tracked, drift, cfg.tol.drift_tol, row_drift)
    logging.info(f"Integrated {obs.label} flow to t={t_end:g} ({sol.nfev} evaluations); max drift {trajectory.max_drift:.3e}.")
    if trajectory.drift_exceeded:
        logging.warning(f"{obs.label} flow: drift {trajectory.max_drift:.3e} exceeds drift_tol {cfg.tol.drift_tol:.1e}")
    return trajectory


def observable_drift(trajectory: Trajectory, obs: Observable, cfg: ModelConfig) -> float:
    """Max relative deviation of any observable along a computed trajectory."""
    values = np.array([obs.value(point, cfg) for point in trajectory.states()])
    return float(np.max(_relative_deviation(values)))


def spectrum_drift(trajectory: Trajectory, cfg: ModelConfig) -> float:
    """Max relative change of the sorted Lax eigenvalues along the trajectory."""
    spectra = []
    for qi, pi in zip(trajectory.q, trajectory.p):
        L, _ = build_lax_generic(qi, pi, cfg)
        spectra.append(np.linalg.eigvalsh(L))
    spectra = np.array(spectra)
    return float(np.max(np.abs(spectra - spectra[0]) / np.maximum(1.0, np.abs(spectra[0]))))


@dataclass(frozen=True)
class LinearityResult:
    slope: float
    intercept: float
    max_residual: float
    tolerance: float
    bracket_slope: float
    formula_slope: Optional[float]

    @property
    def slope_error(self) -> float:
        return abs(self.slope - self.bracket_slope) / max(1.0, abs(self.bracket_slope))

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tolerance


def linearity_check(obs: Observable, k: int, start: PhasePoint, cfg: ModelConfig, t_end: float,
                    control: Optional[StepControl] = None) -> LinearityResult:
    """
    Line fit of I_k^1(t) along the flow of a spectral observable. The slope is
    compared with {I_k^1, obs} at t=0, and for obs = I_j with kappa j I_{j+k}.
    """
    if not obs.spectral:
        raise ValueError(f"{obs.label} is not a function of I_1..I_n; the linear law does not apply")
    weighted = WeightedTrace(k)
    weighted.validate(cfg)
    trajectory = hamiltonian_flow(obs, start, cfg, t_end, control)
    values = np.array([weighted.value(point, cfg) for point in trajectory.states()])
    slope, intercept = np.polyfit(trajectory.times, values, 1)
    residual = float(np.max(np.abs(values - (slope * trajectory.times + intercept))))
    bracket = poisson_bracket(weighted, obs, start, cfg)
    formula = None
    if isinstance(obs, PowerTrace):
        j = obs.k
        I, _ = spectral_sums(start, cfg, [j + k])
        formula = cfg.kappa * j * I[j + k]
    tolerance = cfg.tol.lin_tol * (1.0 + abs(slope) * t_end)
    logging.info(f"I1({k}) along {obs.label}: slope {slope:.10g}, bracket {bracket:.10g}, line residual {residual:.3e}.")
    return LinearityResult(float(slope), float(intercept), residual, tolerance, bracket, formula)


@dataclass(frozen=True)
class ScatteringResult:
    p_plus: np.ndarray
    q_plus: np.ndarray
    velocities: np.ndarray
    fit_residual: float
    lax_spectrum: np.ndarray
    asymptotic_spectrum: np.ndarray
    spectrum_match_error: float
    final_min_gap: float
    tolerance: float
    final_state: Optional[PhasePoint] = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.spectrum_match_error < self.tolerance

    def to_dict(self) -> dict:
        return {
            "p_plus": self.p_plus,
            "q_plus": self.q_plus,
            "velocities": self.velocities,
            "fit_residual": self.fit_residual,
            "lax_spectrum": self.lax_spectrum,
            "asymptotic_spectrum": self.asymptotic_spectrum,
            "spectrum_match_error": self.spectrum_match_error,
            "final_min_gap": self.final_min_gap,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def asymptotic_momenta(velocities: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Inverts v = d h/dp = 2s sinh(2s p) of a decoupled particle."""
    two_s = 2.0 * cfg.scale
    return np.arcsinh(np.asarray(velocities) / two_s) / two_s


def fit_asymptotes(times: np.ndarray, q: np.ndarray):
    """
    Least-squares fit of q_i(t) = a_i + v_i t + c_i / t; the 1/t term absorbs the
    slow relaxation of the interaction. Returns (a, v, max residual).
    """
    basis = np.column_stack([np.ones_like(times), times, 1.0 / times])
    coef, *_ = np.linalg.lstsq(basis, q, rcond=None)
    residual = float(np.max(np.abs(basis @ coef - q)))
    return coef[0], coef[1], residual


def scattering_extract(start: PhasePoint, cfg: ModelConfig, t_end: float,
                       control: Optional[StepControl] = None) -> ScatteringResult:
    """
    Asymptotic momenta from the h-flow. The sorted exp(2s p_i^+) must equal the
    Lax spectrum at the start.
    """
    trajectory = hamiltonian_flow(PrincipalHamiltonian(), start, cfg, t_end, control)
    mask = trajectory.times >= (1.0 - FIT_WINDOW) * t_end
    mask &= trajectory.times > 0
    q_plus, velocities, residual = fit_asymptotes(trajectory.times[mask], trajectory.q[mask])
    final_gap = trajectory.state(-1).min_gap
    required = SEPARATION_FACTOR * abs(cfg.chi)
    if cfg.n > 1 and final_gap < required:
        raise HorizonError(
            f"min gap {final_gap:.3g} at t_end={t_end:g} is below {required:g}; integrate to a longer horizon",
            residual,
        )
    p_plus = asymptotic_momenta(velocities, cfg)
    L, _ = build_lax_generic(start.q, start.p, cfg)
    lax_spectrum = np.sort(np.linalg.eigvalsh(L))
    asymptotic = np.sort(np.exp(2.0 * cfg.scale * p_plus))
    error = float(np.max(np.abs(asymptotic - lax_spectrum) / lax_spectrum))
    logging.info(f"Scattering: spectrum match error {error:.3e}, fit residual {residual:.3e}, final gap {final_gap:.3g}.")
    return ScatteringResult(
        p_plus=p_plus,
        q_plus=q_plus,
        velocities=velocities,
        fit_residual=residual,
        lax_spectrum=lax_spectrum,
        asymptotic_spectrum=asymptotic,
        spectrum_match_error=error,
        final_min_gap=final_gap,
        tolerance=cfg.tol.spec_tol,
        final_state=trajectory.state(-1),
    )


def asymptotic_form_label(cfg: ModelConfig) -> str:
    return "sum exp(k p_i)" if cfg.scale == 0.5 else "sum exp(2 k p_i)"


def asymptotic_form_error(point: PhasePoint, cfg: ModelConfig, k: int) -> float:
    """|I_k - sum_i exp(2 s k p_i)|, which decays like chi^2 / gap^2 for separated particles."""
    I, _ = spectral_sums(point, cfg, [k])
    return float(abs(I[k] - np.sum(np.exp(2.0 * cfg.scale * k * point.p))))


def conserved_family_drift(trajectory: Trajectory, families: Sequence[Observable], cfg: ModelConfig) -> Dict[str, float]:
    return {fam.label: observable_drift(trajectory, fam, cfg) for fam in families}

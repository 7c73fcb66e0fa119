"""
Lax matrix of the rational Ruijsenaars-Schneider model and its trace invariants.

The `*_generic` functions take q, p as numpy arrays or duals and never leave
the dual-aware primitives in src.dual, so the poisson engine differentiates
exactly the code that produces the values.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

import numpy as np

from src import dual as ad
from src.config import Convention, ModelConfig
from src.errors import ConditioningWarning, ImaginaryResidueError
from src.phase_space import PhasePoint


@dataclass(frozen=True)
class LaxMatrix:
    entries: np.ndarray
    u: np.ndarray
    convention: Convention

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))


@dataclass(frozen=True)
class SpectralTrace:
    """A real trace invariant plus the diagnostics attached to it."""

    value: float
    imag_residue: float
    condition: float
    ill_conditioned: bool

    def __float__(self) -> float:
        return self.value


def build_u_generic(q, p, cfg: ModelConfig):
    """u_j = exp(s p_j) * prod_{m != j} [1 + chi^2/(q_j - q_m)^2]^(1/4)."""
    n = cfg.n
    chi2 = float(cfg.chi) ** 2
    eye = np.eye(n)
    # diagonal of d is zero; shift it to 1 and mask the term away
    d = q[:, None] - q[None, :] + eye
    log_factor = (1.0 - eye) * ad.log1p(chi2 / (d * d))
    return ad.exp(cfg.scale * p + 0.25 * ad.total(log_factor, axis=1))


def build_lax_generic(q, p, cfg: ModelConfig):
    """L_jk = u_j [i chi / (i chi + q_j - q_k)] u_k; returns (L, u)."""
    u = build_u_generic(q, p, cfg)
    ichi = 1j * float(cfg.chi)
    cauchy = ichi / (ichi + (q[:, None] - q[None, :]))
    return u[:, None] * cauchy * u[None, :], u


def lax_powers_generic(L, ks: Iterable[int]) -> Dict[int, object]:
    """
    L^k for every requested k by repeated multiplication; negative powers go
    through a linear solve for L^{-1}.
    """
    ks = sorted(set(ks))
    n = ad.value_of(L).shape[0]
    powers: Dict[int, object] = {0: np.eye(n)}
    k_max = max([0] + ks)
    k_min = min([0] + ks)
    current = np.eye(n)
    for k in range(1, k_max + 1):
        current = L if k == 1 else current @ L
        powers[k] = current
    if k_min < 0:
        L_inv = ad.inv(L)
        current = np.eye(n)
        for k in range(1, -k_min + 1):
            current = L_inv if k == 1 else current @ L_inv
            powers[-k] = current
    return {k: powers[k] for k in ks}


def _assert_real(x, abs_tol: float, label: str):
    """
    Assert-then-discard policy for imaginary residues of real invariants.

    The residue bound is abs_tol * (1 + |Re x|), relative to the size of the
    trace; near unit values it reduces to abs_tol.
    """
    v = complex(ad.value_of(x))
    residue = abs(v.imag)
    if residue > abs_tol * (1.0 + abs(v.real)):
        raise ImaginaryResidueError(f"{label} has imaginary residue {residue:.3e} (value {v.real:.6e})")
    return ad.real(x)


def spectral_sums_generic(q, p, cfg: ModelConfig, ks: Iterable[int]) -> Tuple[Dict[int, object], Dict[int, object]]:
    """Returns ({k: I_k}, {k: I_k^1}) for the requested k, as reals or real duals."""
    ks = sorted(set(ks))
    L, _ = build_lax_generic(q, p, cfg)
    powers = lax_powers_generic(L, ks)
    tol = cfg.tol.abs_tol
    I, I1 = {}, {}
    for k in ks:
        Lk = powers[k]
        if k == 0:
            I[0] = float(cfg.n)
            I1[0] = ad.total(q)
            continue
        I[k] = _assert_real(ad.trace(Lk), tol, f"I_{k}")
        I1[k] = _assert_real(ad.total(q * ad.diagonal(Lk)), tol, f"I^1_{k}")
    return I, I1


# -- plain-float operations on validated points ------------------------------

def build_u(point: PhasePoint, cfg: ModelConfig) -> np.ndarray:
    point.validate(cfg)
    return build_u_generic(point.q, point.p, cfg)


def build_lax(point: PhasePoint, cfg: ModelConfig) -> LaxMatrix:
    point.validate(cfg)
    L, u = build_lax_generic(point.q, point.p, cfg)
    return LaxMatrix(entries=L, u=u, convention=cfg.convention)


def _trace_result(point: PhasePoint, cfg: ModelConfig, k: int, weighted: bool) -> SpectralTrace:
    point.validate(cfg)
    L, _ = build_lax_generic(point.q, point.p, cfg)
    condition = 1.0
    ill = False
    if k < 0:
        condition = float(np.linalg.cond(L))
        ill = condition > cfg.condition_limit
        if ill:
            message = f"Lax matrix condition estimate {condition:.3e} exceeds {cfg.condition_limit:.1e} for k={k}"
            logging.warning(message)
            warnings.warn(message, ConditioningWarning)
    if k == 0:
        value = float(np.sum(point.q)) if weighted else float(cfg.n)
        return SpectralTrace(value, 0.0, condition, ill)
    Lk = lax_powers_generic(L, [k])[k]
    raw = complex(np.sum(point.q * np.diagonal(Lk))) if weighted else complex(np.trace(Lk))
    label = f"I^1_{k}" if weighted else f"I_{k}"
    value = float(_assert_real(raw, cfg.tol.abs_tol, label))
    return SpectralTrace(value, abs(raw.imag), condition, ill)


def lax_power_trace(point: PhasePoint, cfg: ModelConfig, k: int) -> SpectralTrace:
    """I_k = tr(L^k)."""
    return _trace_result(point, cfg, k, weighted=False)


def weighted_trace(point: PhasePoint, cfg: ModelConfig, k: int) -> SpectralTrace:
    """I_k^1 = tr(diag(q) L^k)."""
    return _trace_result(point, cfg, k, weighted=True)


def spectral_sums(point: PhasePoint, cfg: ModelConfig, ks: Iterable[int]) -> Tuple[Dict[int, float], Dict[int, float]]:
    point.validate(cfg)
    I, I1 = spectral_sums_generic(point.q, point.p, cfg, ks)
    return {k: float(v) for k, v in I.items()}, {k: float(v) for k, v in I1.items()}


def principal_hamiltonian(point: PhasePoint, cfg: ModelConfig) -> float:
    """h = (I_1 + I_{-1}) / 2 from the Lax matrix."""
    I, _ = spectral_sums(point, cfg, [-1, 1])
    return 0.5 * (I[1] + I[-1])


def total_momentum(point: PhasePoint, cfg: ModelConfig) -> float:
    """P = (I_1 - I_{-1}) / 2."""
    I, _ = spectral_sums(point, cfg, [-1, 1])
    return 0.5 * (I[1] - I[-1])


def interaction_factors(point: PhasePoint, cfg: ModelConfig) -> np.ndarray:
    """f_k = prod_{j != k} [1 + chi^2/(q_k - q_j)^2]^(1/2)."""
    n = cfg.n
    eye = np.eye(n)
    d = point.q[:, None] - point.q[None, :] + eye
    return np.exp(0.5 * np.sum((1.0 - eye) * np.log1p(cfg.chi ** 2 / d ** 2), axis=1))


@dataclass(frozen=True)
class HamiltonianIdentity:
    """Lax-based h against the explicit cosh sum."""

    lax_value: float
    direct_value: float
    residual: float
    matched_value: float
    matched_residual: float


def hamiltonian_identity(point: PhasePoint, cfg: ModelConfig) -> HamiltonianIdentity:
    """
    Compares h = (I_1 + I_{-1})/2 with sum_k cosh(p_k) f_k as written for the
    principal Hamiltonian, and with sum_k cosh(2 s p_k) f_k which matches the
    configured exponent convention. Under the half convention both coincide.
    """
    h = principal_hamiltonian(point, cfg)
    f = interaction_factors(point, cfg)
    direct = float(np.sum(np.cosh(point.p) * f))
    matched = float(np.sum(np.cosh(2.0 * cfg.scale * point.p) * f))
    return HamiltonianIdentity(h, direct, abs(h - direct), matched, abs(h - matched))


def spectrum(point: PhasePoint, cfg: ModelConfig) -> np.ndarray:
    """Ascending eigenvalues of the Lax matrix."""
    return build_lax(point, cfg).eigenvalues()

"""
Gradients of observables by forward-mode dual sweeps, canonical Poisson
brackets, and the residual suites for the bracket algebra of I_k and I_k^1.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src import dual as ad
from src.config import ModelConfig
from src.errors import ConventionInconsistencyError, DifferentiationError, IndexRangeError, SingularConfigurationError
from src.lax import spectral_sums_generic
from src.observables import Observable, Product, PowerTrace, WeightedTrace
from src.phase_space import PhasePoint, make_generator, sample_points
from src.report import SuiteRecord

FD_STEP = 1e-5

ANCHOR_18 = "{I_k^1, I_j} = kappa j I_{j+k}"
ANCHOR_19 = "{I_k^1, I_j^1} = kappa (j - k) I_{j+k}^1"
ANCHOR_KAPPA = "least-squares kappa in {I_k^1, I_j} = kappa j I_{j+k}"
ANCHOR_AXIOMS = "canonical bracket: antisymmetry, bilinearity, Leibniz rule, Jacobi identity"


@dataclass(frozen=True)
class Gradient:
    dq: np.ndarray
    dp: np.ndarray

    def row(self, order: str = "qp") -> np.ndarray:
        return np.concatenate([self.dq, self.dp] if order == "qp" else [self.dp, self.dq])


def _seeded(point: PhasePoint, directions: np.ndarray):
    n = point.n
    return ad.seed(point.q, directions[..., :n]), ad.seed(point.p, directions[..., n:])


def _check_finite(deriv: np.ndarray, label: str) -> None:
    bad = np.flatnonzero(~np.isfinite(deriv))
    if bad.size:
        raise DifferentiationError(f"non-finite derivative of {label} at coordinate {int(bad[0])}", int(bad[0]))


def _tangent_of(out, size: int) -> np.ndarray:
    # constants and unseeded duals carry no tangent
    if not ad.is_dual(out) or out.deriv.size != size:
        return np.zeros(size)
    return np.real(out.deriv).astype(float).reshape(size)


def gradient(obs: Observable, point: PhasePoint, cfg: ModelConfig, batched: bool = True) -> Gradient:
    """
    (df/dq, df/dp) by forward-mode duals. With batched=True all 2n unit seeds
    travel in one sweep along a seed axis; otherwise one coordinate is seeded
    per pass.
    """
    point.validate(cfg)
    n = cfg.n
    E = np.eye(2 * n)
    if batched:
        q, p = _seeded(point, E)
        d = _tangent_of(obs.evaluate(q, p, cfg), 2 * n)
    else:
        d = np.zeros(2 * n)
        for i in range(2 * n):
            q, p = _seeded(point, E[i])
            out = obs.evaluate(q, p, cfg)
            d[i] = float(np.real(out.deriv)) if ad.is_dual(out) else 0.0
    _check_finite(d, obs.label)
    return Gradient(d[:n].copy(), d[n:].copy())


def finite_difference_gradient(obs: Observable, point: PhasePoint, cfg: ModelConfig, step: float = FD_STEP) -> Gradient:
    """Central differences with step scaled by max(1, |z_i|)."""
    z = point.validate(cfg).as_vector()
    d = np.zeros_like(z)
    for i in range(z.size):
        h = step * max(1.0, abs(z[i]))
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        d[i] = (obs.value(PhasePoint.from_vector(zp), cfg) - obs.value(PhasePoint.from_vector(zm), cfg)) / (2 * h)
    _check_finite(d, obs.label)
    n = point.n
    return Gradient(d[:n], d[n:])


def _gradient_any(obs: Observable, point: PhasePoint, cfg: ModelConfig) -> Gradient:
    return gradient(obs, point, cfg) if obs.supports_dual else finite_difference_gradient(obs, point, cfg)


def bracket_of_gradients(gf: Gradient, gg: Gradient) -> float:
    """sum_i (df/dq_i dg/dp_i - df/dp_i dg/dq_i); exactly zero when gf is gg."""
    return float(np.sum(gf.dq * gg.dp - gf.dp * gg.dq))


def bracket_scale(gf: Gradient, gg: Gradient) -> float:
    """Magnitude of the terms that cancel in a bracket, used for normalization."""
    return float(np.sum(np.abs(gf.dq * gg.dp)) + np.sum(np.abs(gf.dp * gg.dq)))


def poisson_bracket(f: Observable, g: Observable, point: PhasePoint, cfg: ModelConfig) -> float:
    """Canonical bracket {f, g} at a point."""
    gf = _gradient_any(f, point, cfg)
    gg = gf if g is f else _gradient_any(g, point, cfg)
    return bracket_of_gradients(gf, gg)


class BracketObservable(Observable):
    """{f, g} as an observable; evaluated by values only, differentiated by finite differences."""

    supports_dual = False

    def __init__(self, f: Observable, g: Observable):
        self.f, self.g = f, g

    @property
    def label(self) -> str:
        return f"{{{self.f.label},{self.g.label}}}"

    def combine(self, I, I1, q, p, cfg):
        return poisson_bracket(self.f, self.g, PhasePoint(ad.value_of(q), ad.value_of(p)), cfg)

    def evaluate(self, q, p, cfg):
        if ad.is_dual(q) or ad.is_dual(p):
            raise TypeError("bracket observables are evaluated with plain floats only")
        return self.combine({}, {}, q, p, cfg)


# -- batched invariant gradients -------------------------------------------------

@dataclass
class InvariantJet:
    """Values and gradients (as (q, p) rows) of I_k and I_k^1 at one point."""

    I: Dict[int, float]
    I1: Dict[int, float]
    grad_I: Dict[int, Gradient]
    grad_I1: Dict[int, Gradient]

    def bracket(self, a: Gradient, b: Gradient) -> float:
        return bracket_of_gradients(a, b)


def invariant_jet(point: PhasePoint, cfg: ModelConfig, ks: Iterable[int]) -> InvariantJet:
    """One batched dual sweep producing every requested I_k, I_k^1 and their gradients."""
    point.validate(cfg)
    n = cfg.n
    q, p = _seeded(point, np.eye(2 * n))
    I, I1 = spectral_sums_generic(q, p, cfg, ks)

    def split(values):
        vals, grads = {}, {}
        for k, v in values.items():
            vals[k] = float(ad.value_of(v))
            d = _tangent_of(v, 2 * n)
            _check_finite(d, f"trace index {k}")
            grads[k] = Gradient(d[:n].copy(), d[n:].copy())
        return vals, grads

    Iv, gI = split(I)
    I1v, gI1 = split(I1)
    return InvariantJet(Iv, I1v, gI, gI1)


def index_pairs(lo: int, hi: int, n: int) -> List[Tuple[int, int]]:
    """All (j, k) in [lo, hi]^2 within the bound |j| + |k| <= 2n + 2."""
    return [(j, k) for j in range(lo, hi + 1) for k in range(lo, hi + 1) if abs(j) + abs(k) <= 2 * n + 2]


def _check_pairs(pairs: Sequence[Tuple[int, int]], n: int) -> None:
    for j, k in pairs:
        if abs(j) + abs(k) > 2 * n + 2:
            raise IndexRangeError(f"index pair (j={j}, k={k}) exceeds |j|+|k| <= 2n+2 = {2 * n + 2}")


def _suite_points(cfg: ModelConfig, samples: Optional[int], rng) -> List[PhasePoint]:
    rng = make_generator(cfg.seed) if rng is None else rng
    return sample_points(cfg, cfg.samples if samples is None else samples, rng)


def _jets(points: Sequence[PhasePoint], cfg: ModelConfig, ks: Iterable[int], rng) -> List[InvariantJet]:
    jets = []
    ks = sorted(set(ks))
    for point in points:
        try:
            jets.append(invariant_jet(point, cfg, ks))
        except SingularConfigurationError as e:
            logging.warning(f"Singular sample rejected ({e}); resampling.")
            jets.extend(_jets(sample_points(cfg, 1, rng), cfg, ks, rng))
    return jets


def _run_bracket_suite(cfg, pairs, samples, rng, virasoro: bool) -> SuiteRecord:
    rng = make_generator(cfg.seed) if rng is None else rng
    pairs = index_pairs(cfg.index_min, cfg.index_max, cfg.n) if pairs is None else list(pairs)
    _check_pairs(pairs, cfg.n)
    ks = {m for j, k in pairs for m in (j, k, j + k)}
    points = _suite_points(cfg, samples, rng)
    kappa = cfg.kappa
    worst, worst_unscaled, worst_at = 0.0, 0.0, None
    for jet in _jets(points, cfg, ks, rng):
        for j, k in pairs:
            if virasoro:
                lhs = jet.bracket(jet.grad_I1[k], jet.grad_I1[j])
                formula = (j - k) * jet.I1[k + j]
            else:
                lhs = jet.bracket(jet.grad_I1[k], jet.grad_I[j])
                formula = j * jet.I[j + k]
            r = abs(lhs - kappa * formula) / (1.0 + abs(kappa * formula))
            if r > worst:
                worst, worst_at = r, (j, k)
            worst_unscaled = max(worst_unscaled, abs(lhs - formula) / (1.0 + abs(formula)))
    suite_id, anchor = ("bracket_19", ANCHOR_19) if virasoro else ("bracket_18", ANCHOR_18)
    record = SuiteRecord(
        suite_id=suite_id,
        anchor=anchor,
        samples=len(points),
        max_residual=worst,
        tolerance=cfg.tol.rel_tol,
        passed=worst < cfg.tol.rel_tol,
        details={"pairs": len(pairs), "kappa_expected": kappa, "worst_pair": list(worst_at) if worst_at else None,
                 "max_residual_kappa_one": worst_unscaled},
    )
    if kappa != 1.0:
        record.findings.append(
            f"bracket constant kappa={kappa:.1f} under convention={cfg.convention.value}; "
            f"residual against the kappa=1 formula reaches {worst_unscaled:.3e}"
        )
    logging.info(f"Suite {suite_id}: max normalized residual {worst:.3e} over {len(points)} points, {len(pairs)} pairs.")
    return record


def bracket_suite_18(cfg: ModelConfig, pairs: Optional[Sequence[Tuple[int, int]]] = None,
                     samples: Optional[int] = None, rng=None) -> SuiteRecord:
    """Residuals of {I_k^1, I_j} - kappa * j * I_{j+k}."""
    return _run_bracket_suite(cfg, pairs, samples, rng, virasoro=False)


def bracket_suite_19(cfg: ModelConfig, pairs: Optional[Sequence[Tuple[int, int]]] = None,
                     samples: Optional[int] = None, rng=None) -> SuiteRecord:
    """Residuals of {I_k^1, I_j^1} - kappa * (j - k) * I_{k+j}^1."""
    return _run_bracket_suite(cfg, pairs, samples, rng, virasoro=True)


@dataclass(frozen=True)
class KappaFit:
    kappa: float
    residual: float
    rows: int
    expected: float

    def require_consistent(self, tol: float) -> "KappaFit":
        if self.residual > tol:
            raise ConventionInconsistencyError(
                f"no single kappa fits {{I_k^1, I_j}} = kappa j I_(j+k): fit residual {self.residual:.3e} > {tol:.1e}"
            )
        return self


def calibrate_kappa(cfg: ModelConfig, samples: Optional[int] = None, rng=None,
                    pairs: Optional[Sequence[Tuple[int, int]]] = None) -> KappaFit:
    """
    Weighted least-squares fit of kappa in {I_k^1, I_j} = kappa * j * I_{j+k}.
    Rows with j = 0 carry no information and are excluded.
    """
    rng = make_generator(cfg.seed) if rng is None else rng
    count = cfg.samples if samples is None else samples
    if count < 10:
        logging.warning(f"kappa calibration with only {count} sample(s); at least 10 are recommended.")
    pairs = index_pairs(cfg.index_min, cfg.index_max, cfg.n) if pairs is None else list(pairs)
    _check_pairs(pairs, cfg.n)
    pairs = [(j, k) for j, k in pairs if j != 0]
    if not pairs:
        raise IndexRangeError("kappa calibration needs at least one index pair with j != 0")
    ks = {m for j, k in pairs for m in (j, k, j + k)}
    a, b = [], []
    for jet in _jets(sample_points(cfg, count, rng), cfg, ks, rng):
        for j, k in pairs:
            a.append(jet.bracket(jet.grad_I1[k], jet.grad_I[j]))
            b.append(j * jet.I[j + k])
    a, b = np.array(a), np.array(b)
    w = 1.0 / (1.0 + np.abs(b))
    kappa = float(np.sum(w * w * a * b) / np.sum(w * w * b * b))
    residual = float(np.max(np.abs(a - kappa * b) * w))
    logging.info(f"Calibrated kappa={kappa:.12f} (fit residual {residual:.3e}, {a.size} rows).")
    return KappaFit(kappa=kappa, residual=residual, rows=int(a.size), expected=cfg.kappa)


def kappa_suite(cfg: ModelConfig, samples: Optional[int] = None, rng=None) -> Tuple[SuiteRecord, KappaFit]:
    fit = calibrate_kappa(cfg, samples, rng)
    deviation = abs(fit.kappa - fit.expected)
    record = SuiteRecord(
        suite_id="kappa_calibration",
        anchor=ANCHOR_KAPPA,
        samples=cfg.samples if samples is None else samples,
        max_residual=max(fit.residual, deviation),
        tolerance=cfg.tol.rel_tol,
        passed=fit.residual <= cfg.tol.rel_tol and deviation <= cfg.tol.rel_tol,
        details={"kappa": fit.kappa, "fit_residual": fit.residual, "rows": fit.rows, "expected": fit.expected},
    )
    try:
        fit.require_consistent(cfg.tol.rel_tol)
    except ConventionInconsistencyError as e:
        logging.error(str(e))
        record.findings.append(str(e))
    if abs(fit.kappa - 1.0) > cfg.tol.rel_tol:
        record.findings.append(f"kappa={fit.kappa:.1f}")
    return record, fit


# -- bracket axioms ----------------------------------------------------------------

def jacobi_residual(f: Observable, g: Observable, h: Observable, point: PhasePoint, cfg: ModelConfig) -> float:
    """
    Normalized cyclic sum {f,{g,h}} + {g,{h,f}} + {h,{f,g}}; the inner brackets
    are differentiated by finite differences.
    """
    terms = [
        poisson_bracket(f, BracketObservable(g, h), point, cfg),
        poisson_bracket(g, BracketObservable(h, f), point, cfg),
        poisson_bracket(h, BracketObservable(f, g), point, cfg),
    ]
    return abs(sum(terms)) / (1.0 + sum(abs(t) for t in terms))


def leibniz_residual(f: Observable, g: Observable, h: Observable, point: PhasePoint, cfg: ModelConfig) -> float:
    """Normalized {fg, h} - f{g,h} - g{f,h}."""
    fv, gv = f.value(point, cfg), g.value(point, cfg)
    lhs = poisson_bracket(Product(f, g), h, point, cfg)
    a, b = fv * poisson_bracket(g, h, point, cfg), gv * poisson_bracket(f, h, point, cfg)
    return abs(lhs - a - b) / (1.0 + abs(lhs) + abs(a) + abs(b))


def axioms_suite(cfg: ModelConfig, samples: int = 5, rng=None) -> SuiteRecord:
    """Antisymmetry, bilinearity, Leibniz and Jacobi spot checks at random points."""
    rng = make_generator(cfg.seed) if rng is None else rng
    points = sample_points(cfg, samples, rng)
    f, g, h = WeightedTrace(1), WeightedTrace(2), PowerTrace(1)
    antisym = bilinear = leibniz = jacobi = 0.0
    for point in points:
        gf, gg, gh = (gradient(o, point, cfg) for o in (f, g, h))
        fg, gf_ = bracket_of_gradients(gf, gg), bracket_of_gradients(gg, gf)
        antisym = max(antisym, abs(fg + gf_), abs(bracket_of_gradients(gf, gf)))
        # {2f + 3g, h} against 2{f,h} + 3{g,h}
        combo = Gradient(2 * gf.dq + 3 * gg.dq, 2 * gf.dp + 3 * gg.dp)
        lhs = bracket_of_gradients(combo, gh)
        rhs = 2 * bracket_of_gradients(gf, gh) + 3 * bracket_of_gradients(gg, gh)
        bilinear = max(bilinear, abs(lhs - rhs) / (1.0 + abs(rhs)))
        leibniz = max(leibniz, leibniz_residual(f, g, h, point, cfg))
        jacobi = max(jacobi, jacobi_residual(f, g, h, point, cfg))
    passed = antisym == 0.0 and bilinear < cfg.tol.rel_tol and leibniz < cfg.tol.rel_tol and jacobi < 1e-6
    record = SuiteRecord(
        suite_id="bracket_axioms",
        anchor=ANCHOR_AXIOMS,
        samples=len(points),
        max_residual=max(antisym, bilinear, leibniz, jacobi),
        tolerance=1e-6,
        passed=passed,
        details={"antisymmetry": antisym, "bilinearity": bilinear, "leibniz": leibniz, "jacobi": jacobi},
    )
    logging.info(f"Suite bracket_axioms: jacobi {jacobi:.3e}, leibniz {leibniz:.3e}.")
    return record

"""
Observables: differentiable real scalar fields on phase space.

Every observable declares which traces it needs (`indices`) and combines
them (`combine`); evaluation is generic over plain floats and duals.
Spectral observables are functions of I_1..I_n only and also expose their
partial derivatives with respect to I_1..I_n.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Sequence, Set, Tuple

import numpy as np

from src import dual as ad
from src.config import ModelConfig
from src.errors import IndexRangeError
from src.invariant_algebra import elementary_gradient, power_sum_gradient
from src.lax import spectral_sums_generic
from src.phase_space import PhasePoint


def max_trace_index(cfg: ModelConfig) -> int:
    """Declared bound for |k| in I(k) and I1(k)."""
    return 4 * cfg.n + 4


class Observable(ABC):
    """A real scalar field on phase space, evaluated through the Lax traces."""

    supports_dual = True
    spectral = False

    @property
    @abstractmethod
    def label(self) -> str:
        ...

    def validate(self, cfg: ModelConfig) -> None:
        """Raises IndexRangeError when parameters are outside their declared range."""

    def indices(self, cfg: ModelConfig) -> Tuple[Set[int], Set[int]]:
        """(ks of I_k, ks of I_k^1) the observable reads."""
        return set(), set()

    @abstractmethod
    def combine(self, I: Dict[int, object], I1: Dict[int, object], q, p, cfg: ModelConfig):
        ...

    def evaluate(self, q, p, cfg: ModelConfig):
        self.validate(cfg)
        ks, ks1 = self.indices(cfg)
        I, I1 = spectral_sums_generic(q, p, cfg, ks | ks1) if (ks or ks1) else ({}, {})
        return self.combine(I, I1, q, p, cfg)

    def value(self, point: PhasePoint, cfg: ModelConfig) -> float:
        point.validate(cfg)
        return float(ad.value_of(self.evaluate(point.q, point.p, cfg)))

    def invariant_partials(self, invariants: Sequence, cfg: ModelConfig) -> list:
        """[dI/dI_j for j = 1..n] evaluated at the given I_1..I_n values."""
        raise TypeError(f"{self.label} is not a function of I_1..I_n")

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class PowerTrace(Observable):
    k: int
    spectral = True

    @property
    def label(self) -> str:
        return f"I({self.k})"

    def validate(self, cfg):
        if abs(self.k) > max_trace_index(cfg):
            raise IndexRangeError(f"I({self.k}) outside |k| <= {max_trace_index(cfg)}")

    def indices(self, cfg):
        return {self.k}, set()

    def combine(self, I, I1, q, p, cfg):
        return I[self.k]

    def invariant_partials(self, invariants, cfg):
        if 1 <= self.k <= cfg.n:
            return [1.0 if j == self.k else 0.0 for j in range(1, cfg.n + 1)]
        return list(power_sum_gradient(cfg.n, self.k)(*invariants))


@dataclass(frozen=True)
class WeightedTrace(Observable):
    k: int

    @property
    def label(self) -> str:
        return f"I1({self.k})"

    def validate(self, cfg):
        if abs(self.k) > max_trace_index(cfg):
            raise IndexRangeError(f"I1({self.k}) outside |k| <= {max_trace_index(cfg)}")

    def indices(self, cfg):
        return set(), {self.k}

    def combine(self, I, I1, q, p, cfg):
        return I1[self.k]


@dataclass(frozen=True)
class PrincipalHamiltonian(Observable):
    spectral = True

    @property
    def label(self) -> str:
        return "H"

    def indices(self, cfg):
        return {-1, 1}, set()

    def combine(self, I, I1, q, p, cfg):
        return 0.5 * (I[1] + I[-1])

    def invariant_partials(self, invariants, cfg):
        inverse = power_sum_gradient(cfg.n, -1)(*invariants)
        return [0.5 * ((1.0 if j == 0 else 0.0) + inverse[j]) for j in range(cfg.n)]


@dataclass(frozen=True)
class TotalMomentum(Observable):
    spectral = True

    @property
    def label(self) -> str:
        return "P"

    def indices(self, cfg):
        return {-1, 1}, set()

    def combine(self, I, I1, q, p, cfg):
        return 0.5 * (I[1] - I[-1])

    def invariant_partials(self, invariants, cfg):
        inverse = power_sum_gradient(cfg.n, -1)(*invariants)
        return [0.5 * ((1.0 if j == 0 else 0.0) - inverse[j]) for j in range(cfg.n)]


@dataclass(frozen=True)
class CanonicalMomentum(Observable):
    """sum_i p_i, the generator of rigid translations."""

    @property
    def label(self) -> str:
        return "Ptot"

    def combine(self, I, I1, q, p, cfg):
        return ad.total(p)


def elementary_from_traces(I: Dict[int, object], m: int):
    """e_m from I_1..I_m by Newton's identities."""
    e = [1.0]
    for r in range(1, m + 1):
        acc = 0.0
        for i in range(1, r + 1):
            acc = acc + (-1) ** (i - 1) * e[r - i] * I[i]
        e.append(acc / r)
    return e[m]


@dataclass(frozen=True)
class CharacteristicCoefficient(Observable):
    """E(m): m-th elementary symmetric function of the Lax spectrum."""

    m: int
    spectral = True

    @property
    def label(self) -> str:
        return f"E({self.m})"

    def validate(self, cfg):
        if not 0 <= self.m <= cfg.n:
            raise IndexRangeError(f"E({self.m}) requires 0 <= m <= n={cfg.n}")

    def indices(self, cfg):
        return set(range(1, self.m + 1)), set()

    def combine(self, I, I1, q, p, cfg):
        return elementary_from_traces(I, self.m)

    def invariant_partials(self, invariants, cfg):
        return list(elementary_gradient(cfg.n, self.m)(*invariants))


@dataclass(frozen=True)
class UserPolynomial(Observable):
    """
    Polynomial in I_1..I_n given as a coefficient table of (coefficient,
    exponents) rows, exponents listing the power of I_1..I_n in order.
    """

    terms: Tuple[Tuple[float, Tuple[int, ...]], ...]
    name: str = "UserPoly"
    spectral = True

    @classmethod
    def from_table(cls, table: Sequence, name: str = "UserPoly") -> "UserPolynomial":
        terms = tuple((float(c), tuple(int(a) for a in exps)) for c, exps in table)
        return cls(terms=terms, name=name)

    @property
    def label(self) -> str:
        return self.name

    def validate(self, cfg):
        for _, exps in self.terms:
            if len(exps) != cfg.n or any(a < 0 for a in exps):
                raise IndexRangeError(f"{self.name}: each exponent row needs {cfg.n} non-negative entries, got {exps}")

    def indices(self, cfg):
        return set(range(1, cfg.n + 1)), set()

    def polynomial(self, invariants: Sequence):
        total = 0.0
        for coef, exps in self.terms:
            term = coef
            for value, a in zip(invariants, exps):
                if a:
                    term = term * value ** a
            total = total + term
        return total

    def combine(self, I, I1, q, p, cfg):
        return self.polynomial([I[j] for j in range(1, cfg.n + 1)])

    def invariant_partials(self, invariants, cfg):
        partials = [0.0] * cfg.n
        for coef, exps in self.terms:
            for j, a in enumerate(exps):
                if a == 0:
                    continue
                term = coef * a
                for i, (value, b) in enumerate(zip(invariants, exps)):
                    power = b - 1 if i == j else b
                    if power:
                        term = term * value ** power
                partials[j] = partials[j] + term
        return partials


@dataclass(frozen=True)
class Product(Observable):
    """f * g, used for the Leibniz rule."""

    left: Observable
    right: Observable

    @property
    def label(self) -> str:
        return f"({self.left.label})*({self.right.label})"

    @property
    def supports_dual(self):
        return self.left.supports_dual and self.right.supports_dual

    def validate(self, cfg):
        self.left.validate(cfg)
        self.right.validate(cfg)

    def indices(self, cfg):
        a, a1 = self.left.indices(cfg)
        b, b1 = self.right.indices(cfg)
        return a | b, a1 | b1

    def combine(self, I, I1, q, p, cfg):
        return self.left.combine(I, I1, q, p, cfg) * self.right.combine(I, I1, q, p, cfg)


def invariant_vector(point: PhasePoint, cfg: ModelConfig) -> np.ndarray:
    """(I_1, ..., I_n) at a point."""
    I, _ = spectral_sums_generic(point.validate(cfg).q, point.p, cfg, range(1, cfg.n + 1))
    return np.array([float(I[j]) for j in range(1, cfg.n + 1)])

"""
Exact algebra of spectral invariants in the coordinates I_1..I_n (and the
weighted traces W_k = I_k^1). Any power sum I_m, m in Z, is a rational
function of I_1..I_n through Newton's identities; the extra constants of
motion are polynomials in (I, W).
"""

from functools import lru_cache
from typing import Callable, List, Sequence, Tuple

import numpy as np
import sympy

from src.errors import IndexRangeError


class SpectralAlgebra:
    """Symbolic power sums and elementary symmetric functions for fixed n."""

    def __init__(self, n: int):
        self.n = n
        self.I = sympy.symbols(f"I_1:{n + 1}", real=True)
        self.W = sympy.symbols(f"W_1:{n + 1}", real=True)
        self._elementary = {0: sympy.Integer(1)}
        self._power = {0: sympy.Integer(n)}
        self._inverse_power = {}

    def elementary(self, m: int) -> sympy.Expr:
        """e_m of the eigenvalues; zero beyond n."""
        if m < 0 or m > self.n:
            return sympy.Integer(0)
        if m not in self._elementary:
            acc = sum((-1) ** (i - 1) * self.elementary(m - i) * self.power_sum(i) for i in range(1, m + 1))
            self._elementary[m] = sympy.expand(acc / m)
        return self._elementary[m]

    def power_sum(self, m: int) -> sympy.Expr:
        """I_m = tr(L^m) as a function of I_1..I_n."""
        if m < 0:
            return self._negative_power_sum(-m)
        if m in self._power:
            return self._power[m]
        if m <= self.n:
            expr = self.I[m - 1]
        else:
            expr = sympy.expand(sum((-1) ** (i - 1) * self.elementary(i) * self.power_sum(m - i) for i in range(1, self.n + 1)))
        self._power[m] = expr
        return expr

    def _inverse_elementary(self, m: int) -> sympy.Expr:
        # eigenvalues 1/lambda have e'_m = e_{n-m} / e_n
        if m < 0 or m > self.n:
            return sympy.Integer(0)
        return self.elementary(self.n - m) / self.elementary(self.n)

    def _negative_power_sum(self, m: int) -> sympy.Expr:
        if m not in self._inverse_power:
            acc = sum((-1) ** (i - 1) * self._inverse_elementary(i) * self._negative_power_sum(m - i) for i in range(1, m))
            acc += (-1) ** (m - 1) * m * self._inverse_elementary(m)
            self._inverse_power[m] = sympy.together(acc)
        return self._inverse_power[m]

    def weighted(self, k: int) -> sympy.Symbol:
        if not 1 <= k <= self.n:
            raise IndexRangeError(f"weighted trace W_{k} is a coordinate only for 1 <= k <= {self.n}")
        return self.W[k - 1]

    def gradient_function(self, expr: sympy.Expr) -> Callable[..., List]:
        """Callable (I_1, ..., I_n) -> [d expr / d I_j]; works on floats and duals."""
        return sympy.lambdify(self.I, [sympy.diff(expr, s) for s in self.I], "numpy")

    def value_function(self, expr: sympy.Expr) -> Callable:
        return sympy.lambdify(self.I, expr, "numpy")


@lru_cache(maxsize=None)
def algebra(n: int) -> SpectralAlgebra:
    return SpectralAlgebra(n)


@lru_cache(maxsize=None)
def power_sum_gradient(n: int, m: int) -> Callable:
    alg = algebra(n)
    return alg.gradient_function(alg.power_sum(m))


@lru_cache(maxsize=None)
def power_sum_value(n: int, m: int) -> Callable:
    alg = algebra(n)
    return alg.value_function(alg.power_sum(m))


@lru_cache(maxsize=None)
def elementary_gradient(n: int, m: int) -> Callable:
    alg = algebra(n)
    return alg.gradient_function(alg.elementary(m))


def constant_expression(alg: SpectralAlgebra, kind: str, b: int, j: int) -> sympy.Expr:
    """C_{b,j}, K_b or L_b as a polynomial in (I, W)."""
    P, W = alg.power_sum, alg.weighted
    n = alg.n
    if kind == "C":
        return W(b) * P(2 * j) - W(j) * P(b + j)
    if kind == "K":
        return W(b) * (P(2) - n) - W(1) * (P(b + 1) - P(b - 1))
    if kind == "L":
        return W(b) * (P(2) + n) - W(1) * (P(b + 1) + P(b - 1))
    raise ValueError(f"Unknown constant kind {kind!r}")


@lru_cache(maxsize=None)
def invariant_jacobian(n: int, mode: str, j: int = 1) -> Tuple[Callable, Tuple[int, ...]]:
    """
    Jacobian of (I_a, X_b) with respect to (I_alpha, W_beta), where X is C_{., j}
    (mode 'C') or K (mode 'K'). Returns a callable over (I_1..I_n, W_1..W_n)
    and the list of b indices.
    """
    alg = algebra(n)
    if mode == "C":
        if not 1 <= j <= n:
            raise IndexRangeError(f"C-mode requires 1 <= j <= n, got j={j}")
        bs = tuple(b for b in range(1, n + 1) if b != j)
    elif mode == "K":
        if n < 2:
            raise IndexRangeError("K-mode requires n >= 2")
        bs = tuple(range(2, n + 1))
    else:
        raise ValueError(f"Unknown Jacobian mode {mode!r}")
    functions = list(alg.I) + [constant_expression(alg, mode, b, j) for b in bs]
    variables = list(alg.I) + [alg.weighted(b) for b in bs]
    matrix = sympy.Matrix(functions).jacobian(variables)
    return sympy.lambdify(list(alg.I) + list(alg.W), matrix, "numpy"), bs


def evaluate_jacobian(n: int, mode: str, j: int, invariants: Sequence[float], weighted: Sequence[float]) -> np.ndarray:
    fn, _ = invariant_jacobian(n, mode, j)
    return np.array(fn(*invariants, *weighted), dtype=float)


def block_determinant(matrix: np.ndarray, n: int) -> float:
    """
    det M = det(A) det(D - C A^-1 B) with A the leading n x n block. For the
    invariant-coordinate Jacobians A is the identity and B is zero, so the
    large d/dI entries of C never enter the elimination.
    """
    A, B = matrix[:n, :n], matrix[:n, n:]
    C, D = matrix[n:, :n], matrix[n:, n:]
    head = float(np.linalg.det(A))
    if D.size == 0:
        return head
    return head * float(np.linalg.det(D - C @ np.linalg.solve(A, B)))

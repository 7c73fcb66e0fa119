"""
First-order dual numbers for forward-mode differentiation.

A Dual holds a value (scalar or array, real or complex) and a tangent of the
same shape, optionally preceded by one seed axis so that several directions
are swept in a single pass. The module-level functions dispatch on their
argument, so the same model code runs on plain numpy arrays and on duals.
"""

from typing import Any, Optional, Tuple

import numpy as np


def _seed_of(*operands) -> Tuple[int, ...]:
    for x in operands:
        if isinstance(x, Dual) and x.seed_shape:
            return x.seed_shape
    return ()


class Dual:
    """Value plus first-order derivative: a + b*eps with eps^2 = 0."""

    __slots__ = ("value", "deriv")
    # Make numpy defer to our reflected operators instead of building object arrays.
    __array_ufunc__ = None

    def __init__(self, value: Any, deriv: Optional[Any] = None):
        self.value = np.asarray(value)
        self.deriv = np.zeros_like(self.value) if deriv is None else np.asarray(deriv)
        if self.deriv.shape[self.deriv.ndim - self.value.ndim:] != self.value.shape:
            raise ValueError(f"tangent shape {self.deriv.shape} does not end with value shape {self.value.shape}")

    @property
    def seed_shape(self) -> Tuple[int, ...]:
        return self.deriv.shape[: self.deriv.ndim - self.value.ndim]

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def tangent(self, shape: Tuple[int, ...], seed: Tuple[int, ...] = ()) -> np.ndarray:
        """Tangent broadcast against a result of the given value shape."""
        d = self.deriv
        extra = len(shape) - self.value.ndim
        if extra > 0:
            d = d.reshape(self.seed_shape + (1,) * extra + self.value.shape)
        return np.broadcast_to(d, (seed or self.seed_shape) + tuple(shape))

    def __repr__(self) -> str:
        return f"Dual({self.value!r}, {self.deriv!r})"

    def __len__(self) -> int:
        return len(self.value)

    def __getitem__(self, index) -> "Dual":
        if not isinstance(index, tuple):
            index = (index,)
        return Dual(self.value[index], self.deriv[(Ellipsis,) + index])

    @property
    def T(self) -> "Dual":
        if self.ndim < 2:
            return self
        return Dual(np.swapaxes(self.value, -1, -2), np.swapaxes(self.deriv, -1, -2))

    def conj(self) -> "Dual":
        return Dual(np.conj(self.value), np.conj(self.deriv))

    @property
    def real(self) -> "Dual":
        return Dual(np.real(self.value), np.real(self.deriv))

    @property
    def imag(self) -> "Dual":
        return Dual(np.imag(self.value), np.imag(self.deriv))

    # -- arithmetic -------------------------------------------------------

    def __neg__(self) -> "Dual":
        return Dual(-self.value, -self.deriv)

    def __pos__(self) -> "Dual":
        return self

    def __add__(self, other) -> "Dual":
        if isinstance(other, Dual):
            value = self.value + other.value
            seed = _seed_of(self, other)
            return Dual(value, self.tangent(value.shape, seed) + other.tangent(value.shape, seed))
        value = self.value + other
        return Dual(value, self.tangent(value.shape))

    __radd__ = __add__

    def __sub__(self, other) -> "Dual":
        return self + (-other)

    def __rsub__(self, other) -> "Dual":
        return (-self) + other

    def __mul__(self, other) -> "Dual":
        if isinstance(other, Dual):
            value = self.value * other.value
            seed = _seed_of(self, other)
            deriv = self.tangent(value.shape, seed) * other.value + self.value * other.tangent(value.shape, seed)
            return Dual(value, deriv)
        value = self.value * other
        return Dual(value, self.tangent(value.shape) * other)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Dual":
        if isinstance(other, Dual):
            value = self.value / other.value
            seed = _seed_of(self, other)
            deriv = (self.tangent(value.shape, seed) - value * other.tangent(value.shape, seed)) / other.value
            return Dual(value, deriv)
        value = self.value / other
        return Dual(value, self.tangent(value.shape) / other)

    def __rtruediv__(self, other) -> "Dual":
        value = other / self.value
        # d(c/x) = -c dx / x^2
        return Dual(value, -self.tangent(value.shape) * (value / self.value))

    def __pow__(self, exponent) -> "Dual":
        if isinstance(exponent, Dual):
            return exp(exponent * log(self))
        if exponent == 0:
            return Dual(np.ones_like(self.value), np.zeros_like(self.deriv))
        value = self.value ** exponent
        return Dual(value, self.deriv * (exponent * self.value ** (exponent - 1)))

    def __matmul__(self, other) -> "Dual":
        if isinstance(other, Dual):
            value = self.value @ other.value
            return Dual(value, self.deriv @ other.value + self.value @ other.deriv)
        return Dual(self.value @ other, self.deriv @ other)

    def __rmatmul__(self, other) -> "Dual":
        return Dual(other @ self.value, other @ self.deriv)


def is_dual(x: Any) -> bool:
    return isinstance(x, Dual)


def value_of(x: Any) -> Any:
    return x.value if isinstance(x, Dual) else x


def seed(value: Any, directions: Any) -> Dual:
    """Dual carrying the given tangent directions (leading axis = seed axis)."""
    return Dual(np.asarray(value, dtype=float), np.asarray(directions, dtype=float))


# -- elementwise functions ------------------------------------------------

def exp(x):
    if isinstance(x, Dual):
        v = np.exp(x.value)
        return Dual(v, x.deriv * v)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(np.log(x.value), x.deriv / x.value)
    return np.log(x)


def log1p(x):
    if isinstance(x, Dual):
        return Dual(np.log1p(x.value), x.deriv / (1.0 + x.value))
    return np.log1p(x)


def sqrt(x):
    if isinstance(x, Dual):
        v = np.sqrt(x.value)
        return Dual(v, x.deriv / (2.0 * v))
    return np.sqrt(x)


def cosh(x):
    if isinstance(x, Dual):
        return Dual(np.cosh(x.value), x.deriv * np.sinh(x.value))
    return np.cosh(x)


def sinh(x):
    if isinstance(x, Dual):
        return Dual(np.sinh(x.value), x.deriv * np.cosh(x.value))
    return np.sinh(x)


def real(x):
    return x.real if isinstance(x, Dual) else np.real(x)


def imag(x):
    return x.imag if isinstance(x, Dual) else np.imag(x)


# -- reductions and linear algebra -----------------------------------------

def _tangent_axes(x: Dual, axis):
    if axis is None:
        return tuple(range(-x.ndim, 0))
    axes = axis if isinstance(axis, tuple) else (axis,)
    return tuple(a - x.ndim if a >= 0 else a for a in axes)


def total(x, axis=None):
    """Sum over value axes (the seed axis is never reduced)."""
    if isinstance(x, Dual):
        return Dual(np.sum(x.value, axis=axis), np.sum(x.deriv, axis=_tangent_axes(x, axis)))
    return np.sum(x, axis=axis)


def trace(x):
    if isinstance(x, Dual):
        return Dual(np.trace(x.value, axis1=-2, axis2=-1), np.trace(x.deriv, axis1=-2, axis2=-1))
    return np.trace(x)


def diagonal(x):
    if isinstance(x, Dual):
        return Dual(np.diagonal(x.value, axis1=-2, axis2=-1), np.diagonal(x.deriv, axis1=-2, axis2=-1))
    return np.diagonal(x)


def solve(a, b):
    """
    Solves a @ x = b for a matrix right-hand side. The tangent follows the
    resolvent rule dx = a^{-1} (db - da x), computed with the same LU solve.
    """
    av, bv = value_of(a), value_of(b)
    x = np.linalg.solve(av, bv)
    if not (isinstance(a, Dual) or isinstance(b, Dual)):
        return x
    seed_shape = _seed_of(a, b)
    rhs = b.tangent(x.shape, seed_shape) if isinstance(b, Dual) else np.zeros(seed_shape + x.shape, dtype=x.dtype)
    if isinstance(a, Dual):
        rhs = rhs - a.deriv @ x
    return Dual(x, np.linalg.solve(av, rhs))


def inv(a):
    n = value_of(a).shape[-1]
    return solve(a, np.eye(n))

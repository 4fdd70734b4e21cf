"""Exact scalars of the form q * sqrt(t) with q rational, t squarefree.

This is the value model for the weight functions and operator entries:
products, quotients and same-root sums stay exact; a sum of unlike roots
has no representative here and raises, so callers can fall back to
floats at a declared tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Union


class MixedRadicalSum(ArithmeticError):
    """Sum of radicals with different squarefree parts; not representable."""


@lru_cache(maxsize=None)
def _squarefree_split(n: int) -> tuple:
    """n = s^2 * t with t squarefree; returns (s, t).  n >= 1."""
    s, t, d = 1, 1, 2
    while d * d <= n:
        while n % (d * d) == 0:
            n //= d * d
            s *= d
        if n % d == 0:
            n //= d
            t *= d
        d += 1
    return s, t * n


@dataclass(frozen=True)
class Radical:
    """coef * sqrt(root); root is a squarefree positive integer."""

    coef: Fraction
    root: int = 1

    @staticmethod
    def of(q) -> "Radical":
        return Radical(Fraction(q), 1)

    @staticmethod
    def sqrt(q) -> "Radical":
        """Exact square root of a nonnegative rational."""
        q = Fraction(q)
        if q < 0:
            raise ValueError("square root of negative rational")
        if q == 0:
            return Radical(Fraction(0), 1)
        s, t = _squarefree_split(q.numerator * q.denominator)
        return Radical(Fraction(s, q.denominator), t)

    def __post_init__(self):
        if self.coef == 0 and self.root != 1:
            object.__setattr__(self, "root", 1)

    def is_zero(self) -> bool:
        return self.coef == 0

    def is_rational(self) -> bool:
        return self.root == 1

    def as_fraction(self) -> Fraction:
        if self.root != 1:
            raise MixedRadicalSum(f"{self} is irrational")
        return self.coef

    def square(self) -> Fraction:
        return self.coef * self.coef * self.root

    def __mul__(self, other: "Radical") -> "Radical":
        if isinstance(other, (int, Fraction)):
            return Radical(self.coef * other, self.root)
        s, t = _squarefree_split(self.root * other.root)
        return Radical(self.coef * other.coef * s, t)

    __rmul__ = __mul__

    def __truediv__(self, other: "Radical") -> "Radical":
        if isinstance(other, (int, Fraction)):
            return Radical(self.coef / other, self.root)
        if other.is_zero():
            raise ZeroDivisionError("division by zero radical")
        # 1/sqrt(r) = sqrt(r)/r
        inv = Radical(Fraction(1, other.root) / other.coef, other.root)
        return self * inv

    def __neg__(self) -> "Radical":
        return Radical(-self.coef, self.root)

    def __add__(self, other: "Radical") -> "Radical":
        if isinstance(other, (int, Fraction)):
            other = Radical.of(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.root != other.root:
            raise MixedRadicalSum(f"cannot add {self} and {other} exactly")
        return Radical(self.coef + other.coef, self.root)

    __radd__ = __add__

    def __sub__(self, other: "Radical") -> "Radical":
        return self + (-other)

    def __abs__(self) -> "Radical":
        return Radical(abs(self.coef), self.root)

    def __float__(self) -> float:
        return float(self.coef) * self.root ** 0.5

    def __str__(self) -> str:
        if self.root == 1:
            return str(self.coef)
        if self.coef == 1:
            return f"sqrt({self.root})"
        return f"{self.coef}*sqrt({self.root})"


Scalar = Union[Radical, float]


def scalar_eq(a: Scalar, b: Scalar, tol: float = 1e-9) -> bool:
    """Exact comparison when both sides are radicals, else within tol."""
    if isinstance(a, Radical) and isinstance(b, Radical):
        return a == b
    return abs(float(a) - float(b)) <= tol


def scalar_mul(a: Scalar, b: Scalar) -> Scalar:
    if isinstance(a, Radical) and isinstance(b, Radical):
        return a * b
    return float(a) * float(b)


def scalar_add(a: Scalar, b: Scalar) -> Scalar:
    if isinstance(a, Radical) and isinstance(b, Radical):
        try:
            return a + b
        except MixedRadicalSum:
            return float(a) + float(b)
    return float(a) + float(b)


def scalar_is_zero(a: Scalar, tol: float = 1e-9) -> bool:
    if isinstance(a, Radical):
        return a.is_zero()
    return abs(a) <= tol

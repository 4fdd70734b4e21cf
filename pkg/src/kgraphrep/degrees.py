"""Componentwise arithmetic on degree vectors in N^k.

Degrees are plain tuples of nonnegative ints.  Everything here is total
except :func:`sub`, which requires componentwise dominance.
"""

from __future__ import annotations

from itertools import product
from typing import Iterator, Tuple

Degree = Tuple[int, ...]


def zero(k: int) -> Degree:
    return (0,) * k


def ones(k: int) -> Degree:
    return (1,) * k


def basis(k: int, i: int) -> Degree:
    """Standard basis vector for color i (1-based)."""
    return tuple(1 if j == i - 1 else 0 for j in range(k))


def diag(k: int, t: int) -> Degree:
    return (t,) * k


def add(m: Degree, n: Degree) -> Degree:
    return tuple(a + b for a, b in zip(m, n))


def sub(m: Degree, n: Degree) -> Degree:
    if not leq(n, m):
        raise ValueError(f"degree {n} does not divide below {m}")
    return tuple(a - b for a, b in zip(m, n))


def scale(t: int, m: Degree) -> Degree:
    return tuple(t * a for a in m)


def leq(m: Degree, n: Degree) -> bool:
    return all(a <= b for a, b in zip(m, n))


def join(m: Degree, n: Degree) -> Degree:
    return tuple(max(a, b) for a, b in zip(m, n))


def meet(m: Degree, n: Degree) -> Degree:
    return tuple(min(a, b) for a, b in zip(m, n))


def total(m: Degree) -> int:
    return sum(m)


def degrees_upto(k: int, bound: Degree) -> Iterator[Degree]:
    """All degrees n with n <= bound componentwise, in lexicographic order."""
    return product(*(range(b + 1) for b in bound))


def degrees_with_total_upto(k: int, s: int) -> Iterator[Degree]:
    """All degrees with coordinate sum <= s, ordered by (sum, lex)."""
    out = [d for d in product(range(s + 1), repeat=k) if sum(d) <= s]
    out.sort(key=lambda d: (sum(d), d))
    return iter(out)

"""q-calculus primitives.

Every function works on exact rationals (``fractions.Fraction``) and on floats.
Integers passed as ``q`` are promoted to ``Fraction`` so that negative powers
stay exact. Python already evaluates ``0 ** 0`` as 1 for int, float and
Fraction, which is the convention the q = 0 specialisations rely on.
"""
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Union

Scalar = Union[Fraction, float]


def as_exact(value) -> Fraction:
    """Converts an int, a Fraction or a decimal string to a Fraction."""
    if isinstance(value, float):
        raise TypeError(f"refusing to convert float {value!r} to an exact rational")
    return Fraction(value)


def is_exact(*values) -> bool:
    return all(isinstance(v, Rational) for v in values)


def _promote(q):
    if isinstance(q, int) and not isinstance(q, bool):
        return Fraction(q)
    return q


def qpow(q, k: int):
    """q**k, exact for rational q; negative k at q = 0 raises ZeroDivisionError."""
    return _promote(q) ** k


@lru_cache(maxsize=8192, typed=True)
def q_int(n: int, q) -> Scalar:
    """[n]_q = 1 + q + ... + q^(n-1), with [0]_q = 0."""
    if n < 0:
        raise ValueError(f"q_int needs n >= 0, got {n}")
    q = _promote(q)
    total = q * 0
    for _ in range(n):
        total = total * q + 1
    return total


@lru_cache(maxsize=8192, typed=True)
def q_factorial(n: int, q) -> Scalar:
    """[n]_q! = [1]_q [2]_q ... [n]_q, with [0]_q! = 1."""
    if n < 0:
        raise ValueError(f"q_factorial needs n >= 0, got {n}")
    q = _promote(q)
    prod = q * 0 + 1
    for i in range(1, n + 1):
        prod = prod * q_int(i, q)
    return prod


@lru_cache(maxsize=8192, typed=True)
def q_binomial(n: int, k: int, q) -> Scalar:
    """Gaussian binomial [n choose k]_q.

    Built from the q-Pascal rule rather than the factorial ratio so that it is
    also defined where some [i]_q vanish (q = -1).
    """
    q = _promote(q)
    zero = q * 0
    if k < 0 or k > n:
        return zero
    if k == 0 or k == n:
        return zero + 1
    row = [zero + 1]
    for m in range(1, n + 1):
        new = [zero + 1] * (m + 1)
        for i in range(1, m):
            new[i] = row[i - 1] + qpow(q, i) * row[i]
        row = new
    return row[k]

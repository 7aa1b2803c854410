"""Martingale polynomials p_n(x; t) and the conditional family Q_n(y; x, t, s).

Both families are monic and generated by three-term recurrences

    x p_n = p_{n+1} + A_n p_n + B_n p_{n-1},    p_{-1} = 0, p_0 = 1.

Arguments may be Fractions (exact mode), floats, numpy arrays or numpy
``Polynomial`` objects; the recurrences only add and multiply.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Tuple

from core.params import HarnessParams
from core.qcore import q_int, qpow

logger = logging.getLogger(__name__)

P_FAMILY = "p-family"
Q_FAMILY = "Q-family"
CUSTOM = "custom"


def coeff_A(n: int, x, t, s, params: HarnessParams):
    """A_n(x,t,s) = q^n x + [n]_q (tη + θ − [2]_q q^(n−1) sη); A_0 = x."""
    if n == 0:
        return x
    q, eta, theta = params.q, params.eta, params.theta
    return qpow(q, n) * x + q_int(n, q) * (t * eta + theta - q_int(2, q) * qpow(q, n - 1) * s * eta)


def coeff_B(n: int, x, t, s, params: HarnessParams):
    """B_n(x,t,s) = [n]_q (t − s q^(n−1)) {1 + ηx q^(n−1) + [n−1]_q η(θ − sη q^(n−1))}; B_0 = 0."""
    if n == 0:
        return x * 0
    q, eta, theta = params.q, params.eta, params.theta
    qn1 = qpow(q, n - 1)
    bracket = 1 + eta * x * qn1 + q_int(n - 1, q) * eta * (theta - s * eta * qn1)
    return q_int(n, q) * (t - s * qn1) * bracket


def p_coefficients_AB(n: int, t, params: HarnessParams) -> Tuple:
    """(A_n, B_n) of the p-family: ((θ + tη)[n]_q, t(1 + ηθ[n−1]_q)[n]_q)."""
    q, eta, theta = params.q, params.eta, params.theta
    a = (theta + t * eta) * q_int(n, q)
    b = t * (1 + eta * theta * q_int(n - 1, q)) * q_int(n, q) if n > 0 else t * 0
    return a, b


def _forward(n: int, y, diag: Callable, offdiag: Callable):
    prev, cur = y * 0, y * 0 + 1
    for m in range(n):
        prev, cur = cur, (y - diag(m)) * cur - offdiag(m) * prev
    return cur


def eval_p(n: int, x, t, params: HarnessParams):
    """p_n(x; t) by the forward recurrence."""
    return _forward(
        n,
        x,
        lambda m: p_coefficients_AB(m, t, params)[0],
        lambda m: p_coefficients_AB(m, t, params)[1],
    )


def eval_Q(n: int, y, x, t, s, params: HarnessParams):
    """Q_n(y; x, t, s) by the forward recurrence."""
    return _forward(
        n,
        y,
        lambda m: coeff_A(m, x, t, s, params),
        lambda m: coeff_B(m, x, t, s, params),
    )


@dataclass(frozen=True)
class OrthoRecurrence:
    """Coefficient generator of a monic three-term recurrence."""

    diag: Callable[[int], object]
    offdiag: Callable[[int], object]
    family: str = CUSTOM
    label: str = ""

    def coefficients(self, N: int) -> Tuple[List, List]:
        """Lists [A_0..A_{N-1}] and [B_0..B_{N-1}]."""
        return [self.diag(n) for n in range(N)], [self.offdiag(n) for n in range(N)]


def recurrence_for(family: str, params: HarnessParams, t=0, x=0, s=0) -> OrthoRecurrence:
    """Packages the p-family(t) or Q-family(x, t, s) coefficients."""
    if family == P_FAMILY:
        return OrthoRecurrence(
            diag=lambda n: p_coefficients_AB(n, t, params)[0],
            offdiag=lambda n: p_coefficients_AB(n, t, params)[1],
            family=P_FAMILY,
            label=f"p(t={t})",
        )
    if family == Q_FAMILY:
        return OrthoRecurrence(
            diag=lambda n: coeff_A(n, x, t, s, params),
            offdiag=lambda n: coeff_B(n, x, t, s, params),
            family=Q_FAMILY,
            label=f"Q(x={x}, t={t}, s={s})",
        )
    raise ValueError(f"unknown recurrence family {family!r}")


# --- Monomial coefficients ---

def _poly_add(a: List, b: List) -> List:
    size = max(len(a), len(b))
    a = a + [0] * (size - len(a))
    b = b + [0] * (size - len(b))
    return [u + v for u, v in zip(a, b)]


def _poly_scale(a: List, c) -> List:
    return [c * u for u in a]


def _coefficients(n: int, diag: Callable, offdiag: Callable) -> List:
    prev, cur = [], [1]
    for m in range(n):
        shifted = [0] + cur
        nxt = _poly_add(shifted, _poly_scale(cur, -diag(m)))
        nxt = _poly_add(nxt, _poly_scale(prev, -offdiag(m)))
        prev, cur = cur, nxt
    return cur


def p_coefficients(n: int, t, params: HarnessParams) -> List:
    """Ascending power-basis coefficients of p_n(·; t); the last entry is 1."""
    return _coefficients(
        n,
        lambda m: p_coefficients_AB(m, t, params)[0],
        lambda m: p_coefficients_AB(m, t, params)[1],
    )


def q_coefficients(n: int, x, t, s, params: HarnessParams) -> List:
    """Ascending power-basis coefficients of Q_n(·; x, t, s)."""
    return _coefficients(
        n,
        lambda m: coeff_A(m, x, t, s, params),
        lambda m: coeff_B(m, x, t, s, params),
    )

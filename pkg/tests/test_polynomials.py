import random
from fractions import Fraction

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from algebra.polynomials import (
    P_FAMILY,
    Q_FAMILY,
    coeff_A,
    coeff_B,
    eval_p,
    eval_Q,
    p_coefficients,
    q_coefficients,
    recurrence_for,
)
from algebra.connection import random_tuples
from core.params import HarnessParams

F = Fraction
P = HarnessParams(F(2, 5), F(3, 7), F(1, 3))


def test_coeff_A_examples():
    x, t, s = F(5, 2), F(3), F(1, 2)
    q, eta, theta = P.q, P.eta, P.theta
    assert coeff_A(0, x, t, s, P) == x
    assert coeff_A(1, x, t, s, P) == q * x + t * eta + theta - (1 + q) * s * eta
    assert coeff_A(4, 0, t, 0, P) == (theta + t * eta) * (1 + q + q**2 + q**3)


def test_coeff_B_examples():
    x, t, s = F(5, 2), F(3), F(1, 2)
    assert coeff_B(0, x, t, s, P) == 0
    assert coeff_B(1, x, t, s, P) == (t - s) * (1 + P.eta * x)
    q = P.q
    assert coeff_B(3, 0, t, 0, P) == t * (1 + P.eta * P.theta * (1 + q)) * (1 + q + q**2)


def test_eval_p_low_degrees():
    x, t = F(7, 3), F(2)
    assert eval_p(0, x, t, P) == 1
    assert eval_p(1, x, t, P) == x
    assert eval_p(2, x, t, P) == x**2 - (P.theta + t * P.eta) * x - t


def test_eval_Q_first_degree_and_root():
    y, x, s = F(4), F(-1, 3), F(1, 2)
    assert eval_Q(1, y, x, F(2), s, P) == y - x
    for n in range(1, 7):
        assert eval_Q(n, x, x, s, s, P) == 0


def test_Q_specialises_to_p():
    for point in random_tuples(40, seed=11):
        p = HarnessParams(point["eta"], point["theta"], point["q"])
        for n in range(9):
            assert eval_Q(n, point["y"], 0, point["t"], 0, p) == eval_p(n, point["y"], point["t"], p)


@pytest.mark.parametrize("n", range(7))
def test_monic_of_exact_degree(n):
    coefs = p_coefficients(n, F(3, 2), P)
    assert len(coefs) == n + 1
    assert coefs[-1] == 1
    qcoefs = q_coefficients(n, F(1, 4), F(3, 2), F(1, 2), P)
    assert len(qcoefs) == n + 1
    assert qcoefs[-1] == 1


def test_coefficients_agree_with_evaluation():
    z = F(-5, 3)
    for n in range(6):
        coefs = p_coefficients(n, F(3, 2), P)
        assert sum(c * z**k for k, c in enumerate(coefs)) == eval_p(n, z, F(3, 2), P)


def test_recurrence_for_families():
    p_rec = recurrence_for(P_FAMILY, P, t=F(2))
    assert (p_rec.diag(0), p_rec.offdiag(0)) == (0, 0)
    q_rec = recurrence_for(Q_FAMILY, P, t=F(2), x=F(5), s=F(1))
    assert (q_rec.diag(0), q_rec.offdiag(0)) == (5, 0)
    diag, offdiag = q_rec.coefficients(4)
    assert diag[2] == coeff_A(2, F(5), F(2), F(1), P)
    assert offdiag[3] == coeff_B(3, F(5), F(2), F(1), P)


def test_p_family_at_q_zero():
    p = HarnessParams(F(1, 2), F(3), F(0))
    t = F(5, 4)
    rec = recurrence_for(P_FAMILY, p, t=t)
    assert rec.diag(2) == p.theta + t * p.eta
    assert rec.offdiag(2) == t * (1 + p.eta * p.theta)


def test_unknown_family():
    with pytest.raises(ValueError):
        recurrence_for("r-family", P)


def test_float_evaluation_is_stable_at_high_degree():
    p = HarnessParams(0.4, 0.3, 0.5)
    xs = np.linspace(-3, 3, 25)
    values = eval_p(100, xs, 1.0, p)
    assert np.all(np.isfinite(values))


def test_polynomial_arguments():
    p = HarnessParams(0.4, 0.3, 0.5)
    Y = Polynomial([0.0, 1.0])
    poly = eval_Q(3, 0.7, Y, 1.5, 0.5, p)
    rng = random.Random(5)
    for _ in range(5):
        x = rng.uniform(-1, 1)
        assert poly(x) == pytest.approx(eval_Q(3, 0.7, x, 1.5, 0.5, p))

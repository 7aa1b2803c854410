import json
from fractions import Fraction
from math import comb, factorial

import pytest

from algebra.connection import (
    IDENTITIES,
    ZERO_TIME_EVERY,
    IdentityReport,
    appendix_reports,
    b_poly,
    b_tilde,
    exact_point,
    gamma_coeff,
    gamma_tilde,
    random_tuples,
    verify_appendix,
    verify_expansion,
    verify_recursion13,
    verify_representation,
    verify_tilde_general,
)
from algebra.polynomials import eval_Q
from core.errors import InvalidParams
from core.params import HarnessParams
from core.qcore import q_binomial

F = Fraction
P = HarnessParams(F(3, 4), F(-2, 5), F(2, 7))


def _failures(reports):
    return [r for r in reports if not r.passed]


# --- Coefficients ---

def test_gamma_conventions():
    s = F(3, 2)
    assert gamma_coeff(5, 2, 0, s, P) == q_binomial(5, 2, P.q)
    assert gamma_coeff(4, 4, 0, s, P) == 1
    for j in range(1, 5):
        assert gamma_coeff(4, 4, j, s, P) == 0
    assert gamma_coeff(4, 2, 3, s, P) == 0
    assert gamma_coeff(4, -1, 0, s, P) == 0
    assert gamma_coeff(4, 5, 0, s, P) == 0


def test_gamma_small_case():
    s = F(3, 2)
    assert gamma_coeff(2, 1, 1, s, P) == s * P.eta * (1 + P.q)


def test_gamma_tilde_at_time_zero_is_gamma():
    s = F(5, 3)
    for n in range(6):
        for k in range(n + 1):
            for j in range(k + 1):
                assert gamma_tilde(n, k, j, 0, s, P) == gamma_coeff(n, k, j, s, P)


def test_gamma_tilde_conventions():
    assert gamma_tilde(4, 2, 0, F(3), F(1), P) == q_binomial(4, 2, P.q)
    assert gamma_tilde(3, 3, 2, F(3), F(1), P) == 0


def test_b_poly_edges():
    y, x, s = F(7, 3), F(-1, 2), F(1, 3)
    assert b_poly(4, 0, y, x, s, P) == 1
    assert b_poly(4, 4, y, x, s, P) == eval_Q(4, y, x, 0, s, P)
    assert b_poly(2, 1, y, x, s, P) == (1 + P.q) * (y - x + s * P.eta)
    assert b_poly(3, 4, y, x, s, P) == 0
    assert b_poly(3, -1, y, x, s, P) == 0


def test_b_tilde_edges():
    y, x, t, s = F(7, 3), F(-1, 2), F(2), F(1, 3)
    assert b_tilde(3, 0, y, x, t, s, P) == 1
    assert b_tilde(3, 3, y, x, t, s, P) == eval_Q(3, y, x, t, s, P)


def test_b_tilde_at_time_zero_is_b_poly():
    for point in random_tuples(20, seed=4):
        p = HarnessParams(point["eta"], point["theta"], point["q"])
        for n in range(6):
            for k in range(n + 1):
                assert b_tilde(n, k, point["y"], point["x"], 0, point["s"], p) == b_poly(
                    n, k, point["y"], point["x"], point["s"], p
                )


@pytest.mark.parametrize("k", range(5))
def test_b_poly_has_degree_k(k):
    p = HarnessParams(F(2, 3), F(1, 5), F(3, 7))
    n, x, s = 5, F(1, 4), F(2, 3)
    values = [b_poly(n, k, F(y), x, s, p) for y in range(k + 2)]
    diff_k = sum((-1) ** (k - i) * comb(k, i) * values[i] for i in range(k + 1))
    diff_k1 = sum((-1) ** (k + 1 - i) * comb(k + 1, i) * values[i] for i in range(k + 2))
    assert diff_k == factorial(k) * q_binomial(n, k, p.q)
    assert diff_k1 == 0


# --- Identity sweeps ---

def test_expansion_representation_recursion_sweep():
    points = list(random_tuples(20, seed=1))
    reports = []
    for n in range(1, 7):
        for point in points:
            reports.append(verify_expansion(n, point))
            reports.append(verify_representation(n, point))
            reports.extend(verify_recursion13(n, k, point) for k in range(n + 2))
    assert _failures(reports) == []


def test_recursion_at_degree_zero():
    for point in random_tuples(5, seed=2):
        assert verify_recursion13(0, 0, point).passed
        assert verify_recursion13(0, 1, point).passed


def test_sweep_at_q_zero():
    reports = []
    for point in random_tuples(10, seed=9, q_zero=True):
        for n in range(1, 6):
            reports.append(verify_expansion(n, point))
            reports.append(verify_representation(n, point))
            reports.append(verify_tilde_general(n, point))
            reports.extend(verify_recursion13(n, k, point) for k in range(n + 2))
    assert _failures(reports) == []


def test_tilde_general_sweep():
    reports = [verify_tilde_general(n, point) for point in random_tuples(20, seed=5) for n in range(6)]
    assert _failures(reports) == []


def test_tilde_general_at_time_zero_matches_expansion():
    for point in random_tuples(5, seed=6):
        point = dict(point, s=F(0), t=F(0))
        for n in range(1, 5):
            assert verify_tilde_general(n, point).passed
            assert verify_expansion(n, point).passed


def test_tilde_general_rejects_bad_time_order():
    point = exact_point(z=1, y=2, x=3, s=2, t=1, u=3, eta="1/2", theta="1/3", q="1/2")
    with pytest.raises(InvalidParams):
        verify_tilde_general(2, point)


def test_appendix_sweep():
    points = list(random_tuples(10, seed=8))
    reports = []
    for n in range(1, 9):
        for k in range(1, n + 2):
            for j in range(k):
                for point in points:
                    reports.extend(appendix_reports(n, k, j, point))
    assert _failures(reports) == []
    assert {r.identity for r in reports} == {"abcd", "ABCD", "coeff-25", "coeff-26"}
    assert {r.identity for r in reports} <= set(IDENTITIES)


def test_appendix_needs_nonzero_q_and_valid_indices():
    point = exact_point(y=1, x=2, s="1/2", eta="1/2", theta="1/3", q=0)
    with pytest.raises(InvalidParams):
        verify_appendix(3, 2, 1, point)
    point["q"] = F(1, 2)
    with pytest.raises(InvalidParams):
        verify_appendix(3, 2, 2, point)
    assert verify_appendix(3, 2, 1, point).identity == "abcd"


# --- Failure reporting ---

def test_failing_identity_is_reported_not_raised(monkeypatch):
    point = exact_point(z=1, y=2, x=3, s="1/2", u=2, eta="1/2", theta="1/3", q="1/2")
    assert verify_expansion(3, point).passed
    monkeypatch.setattr("algebra.connection.b_poly", lambda *args: 0)
    report = verify_expansion(3, point)
    assert not report.passed
    assert report.residual != "0"


def test_floats_are_rejected():
    point = {"z": 1.0, "y": F(2), "x": F(3), "s": F(1, 2), "u": F(2), "eta": F(1, 2), "theta": F(1, 3), "q": F(1, 2)}
    with pytest.raises(InvalidParams, match="exact rationals"):
        verify_expansion(2, point)


def test_report_json_shape():
    point = exact_point(z=1, y=2, x=3, s="1/2", u=2, eta="1/2", theta="1/3", q="1/2")
    line = json.loads(verify_recursion13(2, 1, point).to_json())
    assert set(line) >= {"identity", "n", "k", "j", "tuple", "residual", "pass"}
    assert line["tuple"]["s"] == "1/2"
    assert line["residual"] == "0"
    assert line["pass"] is True
    assert IdentityReport.model_validate(line).passed


def test_random_tuples_are_admissible_and_ordered():
    for point in random_tuples(50, seed=12):
        assert 0 <= point["s"] <= point["t"] <= point["u"]
        assert -1 < point["q"] < 1 and point["q"] != 0
        assert 1 + point["eta"] * point["theta"] >= max(point["q"], 0)


def test_random_tuples_are_reproducible():
    assert list(random_tuples(5, seed=3)) == list(random_tuples(5, seed=3))


def test_random_tuples_include_time_zero():
    points = list(random_tuples(20, seed=12))
    starts = [point["s"] for point in points]
    assert starts.count(0) == 20 // ZERO_TIME_EVERY
    assert all(start > 0 for i, start in enumerate(starts) if i % ZERO_TIME_EVERY != ZERO_TIME_EVERY - 1)


def test_sweeps_pass_at_time_zero():
    points = [point for point in random_tuples(16, seed=13) if point["s"] == 0]
    assert points
    reports = []
    for point in points:
        for n in range(1, 6):
            reports.append(verify_expansion(n, point))
            reports.append(verify_representation(n, point))
            reports.append(verify_tilde_general(n, point))
            reports.extend(verify_recursion13(n, k, point) for k in range(n + 2))
            for k in range(1, n + 2):
                reports.extend(appendix_reports(n, k, k - 1, point))
    assert _failures(reports) == []

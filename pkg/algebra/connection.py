"""Connection coefficients between the Q-families and exact identity checks.

All ``verify_*`` functions work on Fractions only and return an
``IdentityReport`` instead of raising when an identity fails.
"""
import logging
import random
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from algebra.polynomials import coeff_A, coeff_B, eval_p, eval_Q
from core.errors import InvalidParams
from core.params import HarnessParams
from core.qcore import as_exact, is_exact, q_binomial, q_int, qpow

logger = logging.getLogger(__name__)

IDENTITIES = (
    "expansion-11",
    "representation-12",
    "recursion-13",
    "coeff-25",
    "coeff-26",
    "abcd",
    "ABCD",
    "tilde-general",
)

# --- Reports ---

class IdentityReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    identity: str
    n: int
    k: Optional[int] = None
    j: Optional[int] = None
    values: Dict[str, str] = Field(default_factory=dict, alias="tuple")
    residual: str
    passed: bool = Field(alias="pass")
    failed_term: Optional[str] = None

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True)


def _report(identity, n, point: Dict, residual, k=None, j=None, failed_term=None) -> IdentityReport:
    return IdentityReport(
        identity=identity,
        n=n,
        k=k,
        j=j,
        values={name: str(v) for name, v in point.items()},
        residual=str(residual),
        passed=residual == 0,
        failed_term=failed_term,
    )


def _require_exact(point: Dict):
    bad = [name for name, v in point.items() if not is_exact(v)]
    if bad:
        raise InvalidParams(f"identity checks need exact rationals; got floats for {', '.join(bad)}")


# --- Coefficients ---

def _gamma_ratio(n: int, k: int, j: int, q):
    """[n]![n−k+j−1]! / ([n−k]![n−k−1]![j]![k−j]!) for 0 <= j <= k < n, division free."""
    ratio = q_binomial(n, k, q) * q_binomial(n - k + j - 1, j, q)
    for r in range(k - j + 1, k + 1):
        ratio = ratio * q_int(r, q)
    return ratio


def _gamma_outside(n: int, k: int, j: int):
    """Returns the conventional value when one applies, otherwise None."""
    if j < 0 or k < 0 or j > k or k > n:
        return 0
    if k == n:
        return 1 if j == 0 else 0
    return None


def gamma_coeff(n: int, k: int, j: int, s, params: HarnessParams):
    """γ_{n,k,j} = (sη)^j q^{(2k−1−j)j/2} [n]![n−k+j−1]!/([n−k]![n−k−1]![j]![k−j]!)."""
    q = params.q
    fixed = _gamma_outside(n, k, j)
    if fixed is not None:
        return q * 0 + fixed
    if j == 0:
        return q_binomial(n, k, q)
    twice = (2 * k - 1 - j) * j
    assert twice % 2 == 0, (k, j)
    return (s * params.eta) ** j * qpow(q, twice // 2) * _gamma_ratio(n, k, j, q)


def gamma_tilde(n: int, k: int, j: int, t, s, params: HarnessParams):
    """γ̃_{n,k,j}(t) = (−η)^j (same factorial ratio) Π_{r=k−j}^{k−1} (t − s q^r)."""
    q = params.q
    fixed = _gamma_outside(n, k, j)
    if fixed is not None:
        return q * 0 + fixed
    if j == 0:
        return q_binomial(n, k, q)
    value = (-params.eta) ** j * _gamma_ratio(n, k, j, q)
    for r in range(k - j, k):
        value = value * (t - s * qpow(q, r))
    return value


def b_poly(n: int, k: int, y, x, s, params: HarnessParams):
    """b_k^{(n)}(y; x, s) = Σ_j γ_{n,k,j} Q_{k−j}(y; x, 0, s); zero outside 0 <= k <= n."""
    if n < 0 or k < 0 or k > n:
        return params.q * 0
    return sum(
        gamma_coeff(n, k, j, s, params) * eval_Q(k - j, y, x, 0, s, params) for j in range(k + 1)
    )


def b_tilde(n: int, k: int, y, x, t, s, params: HarnessParams):
    """b̃_k^{(n)}(y; x, t, s) = Σ_j γ̃_{n,k,j}(t) Q_{k−j}(y; x, t, s)."""
    if n < 0 or k < 0 or k > n:
        return params.q * 0
    return sum(
        gamma_tilde(n, k, j, t, s, params) * eval_Q(k - j, y, x, t, s, params) for j in range(k + 1)
    )


# --- Identity checks ---

def _params_of(point: Dict) -> HarnessParams:
    return HarnessParams(point["eta"], point["theta"], point["q"])


def verify_expansion(n: int, point: Dict) -> IdentityReport:
    """Q_n(z; x, u, s) = Σ_k b_{n−k}^{(n)}(y; x, s) Q_k(z; y, u, 0)."""
    _require_exact(point)
    p = _params_of(point)
    z, y, x, u, s = point["z"], point["y"], point["x"], point["u"], point["s"]
    rhs = sum(b_poly(n, n - k, y, x, s, p) * eval_Q(k, z, y, u, 0, p) for k in range(n + 1))
    residual = eval_Q(n, z, x, u, s, p) - rhs
    return _report("expansion-11", n, point, residual)


def verify_representation(n: int, point: Dict) -> IdentityReport:
    """Q_n(z; x, u, s) = Σ_{k=1}^n b_{n−k}^{(n)}(0; x, s)(p_k(z; u) − p_k(x; s))."""
    _require_exact(point)
    p = _params_of(point)
    z, x, u, s = point["z"], point["x"], point["u"], point["s"]
    rhs = sum(
        b_poly(n, n - k, 0, x, s, p) * (eval_p(k, z, u, p) - eval_p(k, x, s, p))
        for k in range(1, n + 1)
    )
    residual = eval_Q(n, z, x, u, s, p) - rhs
    return _report("representation-12", n, point, residual)


def _recursion13_residual(n: int, k: int, y, x, u, s, p: HarnessParams):
    """Right side minus left side of the b-recurrence at time u."""
    rhs = (
        b_poly(n, k - 1, y, x, s, p) * (coeff_A(n + 1 - k, y, u, 0, p) - coeff_A(n, x, u, s, p))
        + b_poly(n, k - 2, y, x, s, p) * coeff_B(n + 2 - k, y, u, 0, p)
        - b_poly(n - 1, k - 2, y, x, s, p) * coeff_B(n, x, u, s, p)
        + b_poly(n, k, y, x, s, p)
    )
    return rhs - b_poly(n + 1, k, y, x, s, p)


def verify_recursion13(n: int, k: int, point: Dict) -> IdentityReport:
    _require_exact(point)
    p = _params_of(point)
    residual = _recursion13_residual(n, k, point["y"], point["x"], point["u"], point["s"], p)
    return _report("recursion-13", n, point, residual, k=k)


def verify_tilde_general(n: int, point: Dict) -> IdentityReport:
    """Q_n(z; x, u, s) = Σ_k b̃_{n−k}^{(n)}(y; x, t, s) Q_k(z; y, u, t) for s <= t <= u."""
    _require_exact(point)
    p = _params_of(point)
    z, y, x, u, t, s = (point[name] for name in ("z", "y", "x", "u", "t", "s"))
    if not 0 <= s <= t <= u:
        raise InvalidParams(f"need 0 <= s <= t <= u, got s={s}, t={t}, u={u}")
    rhs = sum(b_tilde(n, n - k, y, x, t, s, p) * eval_Q(k, z, y, u, t, p) for k in range(n + 1))
    residual = eval_Q(n, z, x, u, s, p) - rhs
    return _report("tilde-general", n, point, residual)


# --- Appendix sub-identities ---

def appendix_terms(n: int, k: int, j: int, y, x, s, p: HarnessParams) -> Dict[str, Fraction]:
    """Every bracketed quantity of the two coefficient-matching steps.

    ``a``..``d`` decompose C_{n,k,j} (the u-coefficient step) and ``A``..``D``
    decompose D_{n,k,j} (the intercept step). The second term of ``a`` carries
    q^{n+1−k+j} and the (1+q) term of ``c`` carries [j]_q; with those factors
    C_{n,k,j} equals ηθ[n+2−k]a + q^{n+1−k+j}ηx[n+2−k]b + q^{n+1−k}ηc + d.
    """
    q, eta, theta = p.q, p.eta, p.theta
    g = lambda nn, kk, jj: gamma_coeff(nn, kk, jj, s, p)  # noqa: E731
    qi = lambda m: q_int(m, q)  # noqa: E731
    qp = lambda e: qpow(q, e)  # noqa: E731
    es = eta * s
    m = n + 2 - k

    a = (
        qi(j) * qp(n + 1 - k) * g(n, k - 2, k - 2 - j)
        - qi(j) * qi(j + 1) * qp(n + 1 - k + j) * es * g(n, k - 2, k - 3 - j)
        + qi(n + 1 - k) * g(n, k - 2, k - 2 - j)
        - qi(n) * qi(n - 1) / qi(m) * g(n - 1, k - 2, k - 2 - j)
    )
    b = (
        g(n, k - 2, k - 2 - j)
        - qi(j + 1) * qp(j) * es * g(n, k - 2, k - 3 - j)
        - qi(n) / qi(m) * qp(k - 2 - j) * g(n - 1, k - 2, k - 2 - j)
    )
    c = (
        -qi(k - 1) * g(n, k - 1, k - 1 - j)
        + qi(n) * qi(n - 1) * qp(k - 2) * es * g(n - 1, k - 2, k - 2 - j)
        + qi(m)
        * (
            g(n, k - 2, k - 1 - j)
            - qi(j) * (1 + q) * qp(j - 1) * es * g(n, k - 2, k - 2 - j)
            + qi(j) * qi(j + 1) * qp(2 * j) * es**2 * g(n, k - 2, k - 3 - j)
        )
    )
    d = (
        -qi(m) * qi(j + 1) * qp(n + 1 - k + j) * es * g(n, k - 2, k - 3 - j)
        + qi(m) * g(n, k - 2, k - 2 - j)
        - qi(n) * g(n - 1, k - 2, k - 2 - j)
    )

    A_j = coeff_A(j, x, 0, s, p)
    B_j1 = coeff_B(j + 1, x, 0, s, p)
    bracket_n = 1 + eta * qp(n - 1) * x + qi(n - 1) * eta * (theta - eta * qp(n - 1) * s)
    C_nkj = (
        -eta * qi(k - 1) * qp(n + 1 - k) * g(n, k - 1, k - 1 - j)
        + eta * qi(m) * qp(n + 1 - k)
        * (g(n, k - 2, k - 1 - j) + A_j * g(n, k - 2, k - 2 - j) + B_j1 * g(n, k - 2, k - 3 - j))
        + qi(m) * (1 + qi(n + 1 - k) * eta * theta) * g(n, k - 2, k - 2 - j)
        - qi(n) * bracket_n * g(n - 1, k - 2, k - 2 - j)
    )

    A = (
        -g(n, k - 1, k - 1 - j)
        + qi(j + 1) * qp(j) * es * g(n, k - 1, k - 2 - j)
        + qp(k - 1 - j) * g(n, k - 1, k - 1 - j)
        - qi(n) * qp(n - 3 + k - j) * es * g(n - 1, k - 2, k - 2 - j)
    )
    B = (
        -qi(j) * g(n, k - 1, k - 1 - j)
        + qi(j + 1) * qi(j) * qp(j) * es * g(n, k - 1, k - 2 - j)
        + qi(k - 1) * g(n, k - 1, k - 1 - j)
        - qi(n) * qi(n - 1) * qp(k - 2) * es * g(n - 1, k - 2, k - 2 - j)
    )
    C = qi(j + 1) * g(n, k - 1, k - 2 - j) - qi(n) * qp(k - 2 - j) * g(n - 1, k - 2, k - 2 - j)
    D = (
        g(n + 1, k, k - j)
        - qp(n + 1 - k) * g(n, k - 1, k - j)
        + qi(j) * (1 + q) * qp(n - k + j) * es * g(n, k - 1, k - 1 - j)
        - qi(j + 1) * qi(j) * qp(n + 1 - k + 2 * j) * es**2 * g(n, k - 1, k - 2 - j)
        - qi(n) * (1 + q) * qp(n - 1) * es * g(n, k - 1, k - 1 - j)
        + qi(n) * qi(n - 1) * qp(2 * n - 2) * es**2 * g(n - 1, k - 2, k - 2 - j)
        - g(n, k, k - j)
    )
    D_nkj = (
        g(n + 1, k, k - j)
        - qp(n + 1 - k) * g(n, k - 1, k - j)
        - qp(n + 1 - k) * A_j * g(n, k - 1, k - 1 - j)
        - qp(n + 1 - k) * B_j1 * g(n, k - 1, k - 2 - j)
        - (qi(n + 1 - k) * theta - qp(n) * x - qi(n) * (theta - (1 + q) * qp(n - 1) * es))
        * g(n, k - 1, k - 1 - j)
        - qi(n) * qp(n - 1) * s * bracket_n * g(n - 1, k - 2, k - 2 - j)
        - g(n, k, k - j)
    )

    return {
        "a": a,
        "b": b,
        "c": c,
        "d": d,
        "C_nkj": C_nkj,
        "C_split": C_nkj
        - (eta * theta * qi(m) * a + qp(n + 1 - k + j) * eta * x * qi(m) * b + qp(n + 1 - k) * eta * c + d),
        "A": A,
        "B": B,
        "C": C,
        "D": D,
        "D_nkj": D_nkj,
        "D_split": D_nkj
        - (qp(n + 1 - k + j) * x * A + qp(n + 1 - k) * theta * B + qp(n + 1 - k + j) * s * C + D),
    }


def coefficient_split(n: int, k: int, y, x, s, p: HarnessParams, u_values=(Fraction(1), Fraction(3))):
    """Residuals of the u-coefficient and intercept equations, direct and interpolated.

    The direct residuals are right side minus left side of each equation; the
    interpolated ones come from evaluating the b-recurrence at two values of u.
    """
    q, eta, theta = p.q, p.eta, p.theta
    qi = lambda m: q_int(m, q)  # noqa: E731
    qp = lambda e: qpow(q, e)  # noqa: E731
    bracket_n = 1 + eta * qp(n - 1) * x + qi(n - 1) * eta * (theta - eta * qp(n - 1) * s)

    slope_lhs = qi(n + 2 - k) * (1 + eta * qp(n + 1 - k) * y + qi(n + 1 - k) * eta * theta) * b_poly(n, k - 2, y, x, s, p)
    slope_rhs = eta * qi(k - 1) * qp(n + 1 - k) * b_poly(n, k - 1, y, x, s, p) + qi(n) * bracket_n * b_poly(
        n - 1, k - 2, y, x, s, p
    )
    intercept_lhs = b_poly(n + 1, k, y, x, s, p)
    intercept_rhs = (
        (qp(n + 1 - k) * y + qi(n + 1 - k) * theta - qp(n) * x - qi(n) * (theta - eta * (1 + q) * qp(n - 1) * s))
        * b_poly(n, k - 1, y, x, s, p)
        + qi(n) * qp(n - 1) * s * bracket_n * b_poly(n - 1, k - 2, y, x, s, p)
        + b_poly(n, k, y, x, s, p)
    )

    u1, u2 = u_values
    r1 = _recursion13_residual(n, k, y, x, u1, s, p)
    r2 = _recursion13_residual(n, k, y, x, u2, s, p)
    slope = (r2 - r1) / (u2 - u1)
    intercept = r1 - slope * u1
    return {
        "slope_form": slope_lhs - slope_rhs,
        "intercept_form": intercept_rhs - intercept_lhs,
        "u_slope": slope,
        "u_intercept": intercept,
        "slope_match": slope - (slope_lhs - slope_rhs),
        "intercept_match": intercept - (intercept_rhs - intercept_lhs),
    }


APPENDIX_GROUPS = {
    "abcd": ("a", "b", "c", "d", "C_nkj", "C_split"),
    "ABCD": ("A", "B", "C", "D", "D_nkj", "D_split"),
    "coeff-25": ("slope_form", "slope_match"),
    "coeff-26": ("intercept_form", "intercept_match"),
}


def _appendix_values(n: int, k: int, j: int, point: Dict) -> Dict[str, Fraction]:
    _require_exact(point)
    p = _params_of(point)
    if p.q == 0:
        raise InvalidParams("appendix checks carry negative powers of q and need q != 0")
    if not (1 <= k <= n + 1 and 0 <= j <= k - 1):
        raise InvalidParams(f"need 1 <= k <= n+1 and 0 <= j <= k-1, got n={n}, k={k}, j={j}")
    y, x, s = point["y"], point["x"], point["s"]
    values = appendix_terms(n, k, j, y, x, s, p)
    values.update(coefficient_split(n, k, y, x, s, p))
    return values


def appendix_reports(n: int, k: int, j: int, point: Dict) -> List[IdentityReport]:
    """One report per group: abcd, ABCD, coeff-25 and coeff-26."""
    values = _appendix_values(n, k, j, point)
    reports = []
    for identity, names in APPENDIX_GROUPS.items():
        failed = next((name for name in names if values[name] != 0), None)
        residual = values[failed] if failed else Fraction(0)
        if failed:
            logger.debug(f"{identity}: term {failed} = {residual} at n={n}, k={k}, j={j}")
        reports.append(_report(identity, n, point, residual, k=k, j=j, failed_term=failed))
    return reports


def verify_appendix(n: int, k: int, j: int, point: Dict) -> IdentityReport:
    """Checks a..d, A..D, both aggregates and the u-split of the b-recurrence.

    The returned report belongs to the first group holding a nonzero term, or to
    ``abcd`` when every quantity vanishes.
    """
    reports = appendix_reports(n, k, j, point)
    return next((r for r in reports if not r.passed), reports[0])


# --- Random rational tuples ---

RATIONAL_RANGE = 20
ZERO_TIME_EVERY = 4


def random_rational(rng: random.Random, nonneg: bool = False) -> Fraction:
    values = [v for v in range(-RATIONAL_RANGE, RATIONAL_RANGE + 1) if v != 0]
    value = Fraction(rng.choice(values), rng.choice(values))
    return abs(value) if nonneg else value


def random_tuples(
    count: int,
    seed: int,
    names: Tuple[str, ...] = ("z", "y", "x"),
    times: Tuple[str, ...] = ("s", "t", "u"),
    q_zero: bool = False,
) -> Iterator[Dict[str, Fraction]]:
    """Yields ``count`` admissible rational tuples.

    Space variables are free rationals, the times are nonnegative and sorted so
    that times[0] <= times[1] <= ...; every ZERO_TIME_EVERY-th tuple starts at
    times[0] = 0. q is in (-1, 1) and nonzero unless
    ``q_zero`` pins it to 0. Tuples violating 1 + ηθ >= max(q, 0) are rejected.
    """
    rng = random.Random(seed)
    produced = rejected = 0
    while produced < count:
        point = {name: random_rational(rng) for name in names}
        for name, value in zip(times, sorted(random_rational(rng, nonneg=True) for _ in times)):
            point[name] = value
        if produced % ZERO_TIME_EVERY == ZERO_TIME_EVERY - 1:
            point[times[0]] = Fraction(0)
        point["eta"] = random_rational(rng)
        point["theta"] = random_rational(rng)
        if q_zero:
            point["q"] = Fraction(0)
        else:
            point["q"] = random_rational(rng)
            if not -1 < point["q"] < 1:
                rejected += 1
                continue
        if 1 + point["eta"] * point["theta"] < max(point["q"], 0):
            rejected += 1
            logger.debug(f"rejected inadmissible tuple {point}")
            continue
        produced += 1
        yield point
    logger.debug(f"drew {count} tuples with {rejected} rejections (seed={seed})")


def exact_point(**values) -> Dict[str, Fraction]:
    return {name: as_exact(v) for name, v in values.items()}

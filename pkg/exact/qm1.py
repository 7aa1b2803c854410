"""The two-point bi-Poisson process at q = −1.

X_t takes the two roots a_±(t) of p_2(x; t). Everything here is evaluated
from closed forms; nothing goes through quadrature.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
import pandas as pd

from algebra.polynomials import eval_Q
from core.errors import DegenerateConditioning, InvalidParams
from core.params import HarnessParams
from markov.markov import PathEnsemble, Trajectory, validate_grid, validate_times

logger = logging.getLogger(__name__)

PLUS, MINUS = "+", "-"
SIGNS = (MINUS, PLUS)


@dataclass(frozen=True)
class TwoPointLaw:
    a_plus: float
    a_minus: float
    p_plus: float
    p_minus: float

    def __post_init__(self):
        if not math.isclose(self.p_plus + self.p_minus, 1.0, rel_tol=0, abs_tol=1e-12):
            raise InvalidParams(f"probabilities sum to {self.p_plus + self.p_minus}, not 1")
        if not self.a_plus > self.a_minus:
            raise InvalidParams(f"need a_plus > a_minus, got {self.a_plus} <= {self.a_minus}")

    def atom(self, sign: str) -> float:
        return self.a_plus if sign == PLUS else self.a_minus

    def prob(self, sign: str) -> float:
        return self.p_plus if sign == PLUS else self.p_minus

    @property
    def mean(self) -> float:
        return self.a_plus * self.p_plus + self.a_minus * self.p_minus

    @property
    def second_moment(self) -> float:
        return self.a_plus**2 * self.p_plus + self.a_minus**2 * self.p_minus

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean**2


@dataclass(frozen=True)
class TransitionMatrix2:
    """Rows index the state at s, columns the state at t, both ordered (−, +)."""

    p_mm: float
    p_mp: float
    p_pm: float
    p_pp: float

    def entry(self, alpha: str, beta: str) -> float:
        return {
            (MINUS, MINUS): self.p_mm,
            (MINUS, PLUS): self.p_mp,
            (PLUS, MINUS): self.p_pm,
            (PLUS, PLUS): self.p_pp,
        }[(alpha, beta)]

    def as_array(self) -> np.ndarray:
        return np.array([[self.p_mm, self.p_mp], [self.p_pm, self.p_pp]])

    @classmethod
    def from_array(cls, m: np.ndarray) -> "TransitionMatrix2":
        return cls(p_mm=m[0, 0], p_mp=m[0, 1], p_pm=m[1, 0], p_pp=m[1, 1])

    def to_dict(self) -> Dict:
        return {"labels": list(SIGNS), "rows": self.as_array().tolist()}


def _require_qm1(params: HarnessParams):
    if params.q != -1:
        raise InvalidParams(f"this module serves q = -1, got q={params.q}")


def _radius(t: float, eta: float, theta: float) -> float:
    return math.sqrt(4 * t + (t * eta + theta) ** 2)


def atoms(t: float, params: HarnessParams) -> TwoPointLaw:
    """Atoms a_±(t) = (tη + θ ± R_t)/2 and p_±(t) = 1/2 ∓ (tη + θ)/(2R_t), R_t = √(4t + (tη + θ)²)."""
    _require_qm1(params)
    if t <= 0:
        raise InvalidParams(f"two-point marginals need t > 0, got t={t}")
    eta, theta = float(params.eta), float(params.theta)
    c, r = t * eta + theta, _radius(t, eta, theta)
    return TwoPointLaw(a_plus=(c + r) / 2, a_minus=(c - r) / 2, p_plus=0.5 - c / (2 * r), p_minus=0.5 + c / (2 * r))


def transition_matrix(s: float, t: float, params: HarnessParams) -> TransitionMatrix2:
    """P_{s,t} on the atoms; at s = 0 both rows equal the marginal (p_−(t), p_+(t))."""
    _require_qm1(params)
    validate_times(s, t)
    if s == 0:
        law = atoms(t, params)
        return TransitionMatrix2(p_mm=law.p_minus, p_mp=law.p_plus, p_pm=law.p_minus, p_pp=law.p_plus)
    eta, theta = float(params.eta), float(params.theta)
    rs, rt = _radius(s, eta, theta), _radius(t, eta, theta)
    drift = (s - t) * eta
    return TransitionMatrix2(
        p_mm=(-drift + rs + rt) / (2 * rt),
        p_mp=(drift - rs + rt) / (2 * rt),
        p_pm=(-drift - rs + rt) / (2 * rt),
        p_pp=(drift + rs + rt) / (2 * rt),
    )


def support_residual(s: float, t: float, params: HarnessParams) -> float:
    """max |Q_2(a_β(t); a_α(s), t, s)| over α, β."""
    law_s, law_t = atoms(s, params), atoms(t, params)
    return max(
        abs(eval_Q(2, law_t.atom(beta), law_s.atom(alpha), t, s, params))
        for alpha, beta in itertools.product(SIGNS, SIGNS)
    )


def check_ck_exact(s: float, t: float, u: float, params: HarnessParams) -> float:
    """Entrywise max |P_{s,t} P_{t,u} − P_{s,u}|."""
    validate_times(s, t, u)
    composed = transition_matrix(s, t, params).as_array() @ transition_matrix(t, u, params).as_array()
    return float(np.abs(composed - transition_matrix(s, u, params).as_array()).max())


def conditional_law(s: float, t: float, u: float, alpha: str, gamma: str, params: HarnessParams) -> TwoPointLaw:
    """Law of X_t given X_s = a_α(s), X_u = a_γ(u): p_β ∝ p_{αβ}(s, t) p_{βγ}(t, u)."""
    validate_times(s, t, u)
    if s == 0:
        raise InvalidParams("two-sided conditioning needs s > 0")
    left, right, outer = (transition_matrix(a, b, params) for a, b in ((s, t), (t, u), (s, u)))
    denominator = outer.entry(alpha, gamma)
    if denominator <= 0:
        raise DegenerateConditioning(f"Pr(X_u = a_{gamma}(u) | X_s = a_{alpha}(s)) = {denominator}")
    law = atoms(t, params)
    probs = {beta: left.entry(alpha, beta) * right.entry(beta, gamma) / denominator for beta in SIGNS}
    return TwoPointLaw(a_plus=law.a_plus, a_minus=law.a_minus, p_plus=probs[PLUS], p_minus=probs[MINUS])


def harness_moments(s: float, t: float, u: float, x: float, z: float, params: HarnessParams) -> Tuple[float, float]:
    """Right sides of the two-sided conditional mean and variance at X_s = x, X_u = z."""
    eta, theta, q = float(params.eta), float(params.theta), float(params.q)
    d = u - s
    mean = ((u - t) * x + (t - s) * z) / d
    variance = (u - t) * (t - s) / (u - q * s) * (
        1 + eta * (u * x - s * z) / d + theta * (z - x) / d - (1 - q) * (u * x - s * z) * (z - x) / d**2
    )
    return mean, variance


def harness_table(s: float, t: float, u: float, params: HarnessParams) -> pd.DataFrame:
    law_s, law_u = atoms(s, params), atoms(u, params)
    records = []
    for alpha, gamma in itertools.product(SIGNS, SIGNS):
        x, z = law_s.atom(alpha), law_u.atom(gamma)
        cond = conditional_law(s, t, u, alpha, gamma, params)
        mean, variance = harness_moments(s, t, u, x, z, params)
        records.append(
            {
                "alpha": alpha,
                "gamma": gamma,
                "mean": cond.mean,
                "mean_rhs": mean,
                "variance": cond.variance,
                "variance_rhs": variance,
                "residual": max(abs(cond.mean - mean), abs(cond.variance - variance)),
            }
        )
    return pd.DataFrame.from_records(records)


def check_harness_exact(s: float, t: float, u: float, params: HarnessParams) -> float:
    """Max residual of the conditional mean and variance over (α, γ) ∈ {±}²."""
    return float(harness_table(s, t, u, params)["residual"].max())


# --- Sampling ---

def sample_qm1_paths(grid: Sequence[float], seed: int, n_paths: int, params: HarnessParams) -> PathEnsemble:
    """Simulates the two-state chain; one uniform per path and step from ``default_rng(seed)``."""
    _require_qm1(params)
    grid = validate_grid(grid)
    rng = np.random.default_rng(seed)
    paths = np.zeros((n_paths, len(grid)))
    plus = np.zeros(n_paths, dtype=bool)

    for k in range(1, len(grid)):
        s, t = grid[k - 1], grid[k]
        matrix = transition_matrix(s, t, params)
        to_plus = np.where(plus, matrix.p_pp, matrix.p_mp)
        plus = rng.random(n_paths) < to_plus
        law = atoms(t, params)
        paths[:, k] = np.where(plus, law.a_plus, law.a_minus)
    logger.info(f"sampled {n_paths} q=-1 paths over {len(grid) - 1} steps")
    return PathEnsemble(grid, paths, seed)


def sample_qm1_path(grid: Sequence[float], seed: int, params: HarnessParams) -> Trajectory:
    return sample_qm1_paths(grid, seed, 1, params).trajectory(0)

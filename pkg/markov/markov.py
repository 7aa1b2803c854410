"""Transition kernels of the bi-Poisson process for |q| < 1, with checks and sampling.

P_{s,t}(x, dy) is the orthogonality measure of Q_n(y; x, t, s); the marginal
π_t = P_{0,t}(0, ·) is the orthogonality measure of p_n(x; t). Both are
approximated by N-point Gauss quadrature.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial

from algebra.polynomials import p_coefficients, p_coefficients_AB
from core.errors import InvalidParams, OutsideSupport
from core.params import HarnessParams
from spectral.spectral import (
    DEFAULT_N,
    QuadratureMeasure,
    functional_moments,
    in_support_U,
    p_recurrence,
    point_mass,
    q_recurrence,
    quadrature,
    require_open_q,
    restrict_to_U,
)

logger = logging.getLogger(__name__)

HARNESS_MAX_DEGREE = 3


# --- Paths ---

@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: np.ndarray
    values: np.ndarray
    seed: int

    def __post_init__(self):
        if len(self.grid) != len(self.values):
            raise ValueError("grid and values differ in length")
        if len(self.values) and self.values[0] != 0:
            raise ValueError("trajectories start at X_0 = 0")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.grid, "x": self.values})


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """``paths[i, k]`` is the value of path i at ``grid[k]``."""

    grid: np.ndarray
    paths: np.ndarray
    seed: int

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(self.grid, self.paths[i].copy(), self.seed)

    def summary(self) -> Dict[str, List[float]]:
        return {
            "times": self.grid.tolist(),
            "mean": self.paths.mean(axis=0).tolist(),
            "variance": self.paths.var(axis=0).tolist(),
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.paths, columns=[f"{t:.17g}" for t in self.grid])


def validate_grid(grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise InvalidParams("time grid must be a nonempty list")
    if grid[0] != 0:
        raise InvalidParams(f"time grid must start at 0, got {grid[0]}")
    if np.any(np.diff(grid) <= 0):
        raise InvalidParams("time grid must be strictly increasing")
    return grid


def validate_times(*times: float):
    if times[0] < 0:
        raise InvalidParams(f"times must be nonnegative, got {times[0]}")
    for a, b in zip(times, times[1:]):
        if not a < b:
            raise InvalidParams(f"times must be strictly increasing, got {', '.join(map(str, times))}")


# --- Kernels ---

def marginal(t: float, N: int, params: HarnessParams) -> QuadratureMeasure:
    """π_t as an N-point quadrature; δ_0 at t = 0."""
    require_open_q(params)
    if t < 0:
        raise InvalidParams(f"time must be nonnegative, got t={t}")
    if t == 0:
        return point_mass(0.0)
    return quadrature(p_recurrence(t, params), N)


def kernel(s: float, t: float, x: float, N: int, params: HarnessParams) -> QuadratureMeasure:
    """P_{s,t}(x, ·) as an N-point quadrature; needs x in U_s."""
    require_open_q(params)
    validate_times(s, t)
    params = params.as_floats()
    if not in_support_U(x, s, params, n_max=N):
        raise OutsideSupport(x, s)
    return quadrature(q_recurrence(float(x), t, s, params), N)


class TransitionKernel:
    """Caches P_{s,t}(x, ·) by (s, t, x) for one parameter set and order N.

    With ``confine=True`` every measure is restricted to U_t, so each node it
    returns is a valid starting state for the next step.
    """

    def __init__(self, params: HarnessParams, N: int = DEFAULT_N, confine: bool = False):
        require_open_q(params)
        self.params = params.as_floats()
        self.N = N
        self.confine = confine
        self._cache: Dict[Tuple[float, float, float], QuadratureMeasure] = {}

    def __call__(self, s: float, t: float, x: float) -> QuadratureMeasure:
        key = (float(s), float(t), float(x))
        if key not in self._cache:
            if s == 0 and x == 0:
                measure = marginal(t, self.N, self.params)
            else:
                measure = kernel(s, t, x, self.N, self.params)
            if self.confine:
                measure = restrict_to_U(measure, t, self.params, n_max=self.N)
            self._cache[key] = measure
        return self._cache[key]

    def __len__(self):
        return len(self._cache)

    def clear(self):
        self._cache.clear()


# --- Checks ---

def _p_table(z: np.ndarray, t: float, n_max: int, params: HarnessParams) -> np.ndarray:
    """Rows p_0(z; t) .. p_{n_max}(z; t)."""
    table = np.empty((n_max + 1, len(z)))
    prev, cur = np.zeros_like(z), np.ones_like(z)
    table[0] = cur
    for n in range(n_max):
        a, b = p_coefficients_AB(n, t, params)
        prev, cur = cur, (z - a) * cur - b * prev
        table[n + 1] = cur
    return table


def _scaled(diff: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return np.abs(diff) / np.maximum(1.0, scale)


def martingale_residual_details(
    s: float, u: float, x: float, n_max: int, N: int, params: HarnessParams
) -> Dict[str, float]:
    """Raw and scaled max_n |∫ p_n(z; u) P_{s,u}(x, dz) − p_n(x; s)| over 1 <= n <= n_max.

    ``raw`` is the plain difference; ``residual`` divides each difference by
    max(1, ∫ |p_n(z; u)| P_{s,u}(x, dz)) and is the value tolerances apply to.
    """
    if n_max > N / 4:
        raise InvalidParams(f"n_max={n_max} exceeds N/4 for N={N}")
    params = params.as_floats()
    measure = kernel(s, u, x, N, params)
    values = _p_table(measure.nodes, u, n_max, params)
    at_x = _p_table(np.array([float(x)]), s, n_max, params)[:, 0]
    integrals = values @ measure.weights
    scale = np.abs(values) @ measure.weights
    diff = integrals - at_x
    return {
        "residual": float(_scaled(diff, scale)[1:].max(initial=0.0)),
        "raw": float(np.abs(diff)[1:].max(initial=0.0)),
    }


def check_martingale(s: float, u: float, x: float, n_max: int, N: int, params: HarnessParams) -> float:
    """Scaled martingale residual; see ``martingale_residual_details``."""
    return martingale_residual_details(s, u, x, n_max, N, params)["residual"]


def _functional_p_integrals(y: np.ndarray, t: float, u: float, n_max: int, params: HarnessParams) -> np.ndarray:
    """∫ p_n(z; u) against the Q(y, u, t) functional, for each y, rows n = 0..n_max."""
    moments = functional_moments(q_recurrence(y, u, t, params), n_max)
    moments = [np.broadcast_to(np.asarray(m, dtype=float), y.shape) for m in moments]
    out = np.empty((n_max + 1, len(y)))
    for n in range(n_max + 1):
        coefs = p_coefficients(n, u, params)
        out[n] = sum(c * moments[k] for k, c in enumerate(coefs))
    return out


def ck_residual_details(
    s: float, t: float, u: float, x: float, n_max: int, N: int, params: HarnessParams
) -> Dict[str, float]:
    """Composed-versus-direct Chapman–Kolmogorov residual with bookkeeping.

    Intermediate nodes y outside U_t (spurious Gauss nodes in gaps of the
    support) are integrated with the orthogonality functional of Q(y, u, t)
    instead of a kernel; their number and total weight are returned, along
    with the raw and the scaled (tolerance-checked) residual.
    """
    validate_times(s, t, u)
    params = params.as_floats()
    direct = kernel(s, u, x, N, params)
    middle = kernel(s, t, x, N, params)

    direct_values = _p_table(direct.nodes, u, n_max, params)
    direct_int = direct_values @ direct.weights
    scale = np.abs(direct_values) @ direct.weights

    inside = np.array([in_support_U(y, t, params, n_max=N) for y in middle.nodes])
    composed = np.zeros(n_max + 1)
    for y, w in zip(middle.nodes[inside], middle.weights[inside]):
        inner = kernel(t, u, y, N, params)
        composed += w * (_p_table(inner.nodes, u, n_max, params) @ inner.weights)
    outside_weight = float(middle.weights[~inside].sum())
    if not inside.all():
        logger.info(f"{int((~inside).sum())} intermediate nodes outside U_t carry weight {outside_weight:.3e}")
        composed += _functional_p_integrals(middle.nodes[~inside], t, u, n_max, params) @ middle.weights[~inside]

    diff = composed - direct_int
    return {
        "residual": float(_scaled(diff, scale)[1:].max(initial=0.0)),
        "raw": float(np.abs(diff)[1:].max(initial=0.0)),
        "outside_nodes": int((~inside).sum()),
        "outside_weight": outside_weight,
    }


def check_ck(s: float, t: float, u: float, x: float, n_max: int, N: int, params: HarnessParams) -> float:
    """max_n |∫ p_n(z; u) d(P_{s,t} P_{t,u})(x, ·) − ∫ p_n(z; u) P_{s,u}(x, dz)|, scaled as in check_martingale."""
    return ck_residual_details(s, t, u, x, n_max, N, params)["residual"]


def _middle_expectation(x: float, s: float, t: float, N: int, params: HarnessParams, degree: int):
    """E[f(X_t) | X_s = x] for polynomials f of degree <= ``degree``."""
    if in_support_U(x, s, params, n_max=N):
        measure = kernel(s, t, x, N, params) if s > 0 else marginal(t, N, params)
        return lambda f: float(np.dot(measure.weights, f(measure.nodes)))
    moments = [float(m) for m in functional_moments(q_recurrence(float(x), t, s, params), degree)]
    return lambda f: float(sum(c * moments[k] for k, c in enumerate(f.coef)))


def check_harness_moments(
    s: float, t: float, u: float, a_max: int, b_max: int, N: int, params: HarnessParams
) -> pd.DataFrame:
    """Weak-form check of the two-sided conditional mean and variance.

    For each a <= a_max, b <= b_max compares E[X_s^a X_u^b X_t] with
    E[X_s^a X_u^b L] and E[X_s^a X_u^b X_t^2] with E[X_s^a X_u^b (V + L^2)],
    L and V being the linear regression and quadratic conditional variance.
    X_s is integrated with π_s, X_t given X_s with P_{s,t}, and the moments of
    X_u given X_t are polynomials in X_t taken from the Q(·, u, t) recurrence.
    Returns one row per (a, b, identity); ``scaled`` divides the residual by
    max(1, |lhs|, |rhs|).
    """
    require_open_q(params)
    validate_times(s, t, u)
    if a_max > HARNESS_MAX_DEGREE or b_max > HARNESS_MAX_DEGREE:
        raise InvalidParams(f"a_max and b_max must not exceed {HARNESS_MAX_DEGREE}")
    params = params.as_floats()
    eta, theta, q = params.eta, params.theta, params.q

    Y = Polynomial([0.0, 1.0])
    inner = functional_moments(q_recurrence(Y, u, t, params), b_max + 2)
    M = [m if isinstance(m, Polynomial) else Polynomial([float(m)]) for m in inner]

    D = u - s
    c1, c2 = (u - t) / D, (t - s) / D
    K = (u - t) * (t - s) / (u - q * s)
    outer = marginal(s, N, params)

    rows = {}
    for x, w in zip(outer.nodes, outer.weights):
        expect = _middle_expectation(x, s, t, N, params, degree=b_max + 3)
        e0 = K * (1 + eta * u * x / D - theta * x / D + (1 - q) * u * x**2 / D**2) + c1**2 * x**2
        e1 = K * (-eta * s / D + theta / D - (1 - q) * (u + s) * x / D**2) + 2 * c1 * c2 * x
        e2 = K * (1 - q) * s / D**2 + c2**2
        for b in range(b_max + 1):
            pieces = {
                "mean": (expect(Y * M[b]), expect(c1 * x * M[b] + c2 * M[b + 1])),
                "variance": (expect(Y**2 * M[b]), expect(e0 * M[b] + e1 * M[b + 1] + e2 * M[b + 2])),
            }
            for a in range(a_max + 1):
                for identity, (lhs, rhs) in pieces.items():
                    acc = rows.setdefault((a, b, identity), [0.0, 0.0])
                    acc[0] += w * x**a * lhs
                    acc[1] += w * x**a * rhs

    records = []
    for (a, b, identity), (lhs, rhs) in sorted(rows.items()):
        residual = abs(lhs - rhs)
        records.append(
            {
                "a": a,
                "b": b,
                "identity": identity,
                "lhs": lhs,
                "rhs": rhs,
                "residual": residual,
                "scaled": residual / max(1.0, abs(lhs), abs(rhs)),
            }
        )
    return pd.DataFrame.from_records(records)


# --- Sampling ---

def _inverse_cdf(measure: QuadratureMeasure, uniforms: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(measure.weights)
    idx = np.searchsorted(cdf, uniforms * cdf[-1], side="right")
    return measure.nodes[np.minimum(idx, len(cdf) - 1)]


def sample_paths(
    grid: Sequence[float], seed: int, n_paths: int, N: int, params: HarnessParams
) -> PathEnsemble:
    """Samples ``n_paths`` paths on ``grid`` by inverse CDF on the discrete kernels.

    One generator seeded with ``seed`` draws one uniform per path and step, in
    path order; kernels are computed once per distinct state and restricted to
    U_t, so every sampled state lies in U_t. Runs serially, so output depends
    only on (seed, grid, N, params).
    """
    require_open_q(params)
    grid = validate_grid(grid)
    rng = np.random.default_rng(seed)
    kernels = TransitionKernel(params, N, confine=True)
    paths = np.zeros((n_paths, len(grid)))

    for k in range(1, len(grid)):
        s, t = grid[k - 1], grid[k]
        states, inverse = np.unique(paths[:, k - 1], return_inverse=True)
        uniforms = rng.random(n_paths)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(len(states) + 1))
        for i, x in enumerate(states):
            members = order[bounds[i]:bounds[i + 1]]
            paths[members, k] = _inverse_cdf(kernels(s, t, x), uniforms[members])
        logger.info(f"step {k}/{len(grid) - 1} ({s:g} -> {t:g}): {len(states)} distinct states")
        kernels.clear()
    return PathEnsemble(grid, paths, seed)


def sample_path(grid: Sequence[float], seed: int, N: int, params: HarnessParams) -> Trajectory:
    return sample_paths(grid, seed, 1, N, params).trajectory(0)

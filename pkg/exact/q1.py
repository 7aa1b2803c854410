"""The bi-Poisson process at q = 1.

Transitions are Meixner-type laws (Poisson, Gamma, negative binomial,
binomial) read off the Q-recurrence. Paths are simulated exactly through a
latent chain Z whose transitions change regime at the boundary time θ/η.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel
from scipy.stats import ks_2samp

from core.errors import InvalidParams, UnidentifiableRegime
from core.params import HarnessParams
from markov.markov import PathEnsemble, Trajectory, validate_grid

logger = logging.getLogger(__name__)

POISSON = "poisson"
GAMMA = "gamma"
NEGATIVE_BINOMIAL = "negative_binomial"
BINOMIAL = "binomial"
POINT_MASS = "point_mass"

DISCRIMINANT_TOL = 1e-12
INTEGER_TOL = 1e-9


@dataclass(frozen=True)
class MeixnerParams:
    """Coefficients of y p_n = p_{n+1} + θ̃ n p_n + (t̃ + τ̃(n−1)) n p_{n−1}."""

    theta_tilde: float
    tau_tilde: float
    t_tilde: float

    @property
    def discriminant(self) -> float:
        return self.theta_tilde**2 - 4 * self.tau_tilde


@dataclass(frozen=True)
class DistributionSpec:
    """Y = scale * Z + shift with Z from one of the q = 1 families."""

    family: str
    scale: float = 1.0
    shift: float = 0.0
    args: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        a = self.args
        valid = {
            POINT_MASS: lambda: True,
            POISSON: lambda: a["lam"] > 0,
            GAMMA: lambda: a["r"] > 0 and a["sigma"] > 0,
            NEGATIVE_BINOMIAL: lambda: a["r"] > 0 and 0 < a["p"] < 1,
            BINOMIAL: lambda: a["n"] >= 0 and 0 <= a["p"] <= 1,
        }
        if self.family not in valid:
            raise InvalidParams(f"unknown family {self.family!r}")
        if not valid[self.family]():
            raise InvalidParams(f"{self.family} parameters out of range: {a}")

    @property
    def mean(self) -> float:
        a = self.args
        base = {
            POINT_MASS: lambda: 0.0,
            POISSON: lambda: a["lam"],
            GAMMA: lambda: a["r"] * a["sigma"],
            NEGATIVE_BINOMIAL: lambda: a["r"] * (1 - a["p"]) / a["p"],
            BINOMIAL: lambda: a["n"] * a["p"],
        }[self.family]()
        return self.scale * base + self.shift


class RegimeReport(BaseModel):
    s: float
    t: float
    x: float
    theta_tilde: float
    tau_tilde: float
    t_tilde: float
    discriminant: float
    family: str
    scale: float
    shift: float
    args: Dict[str, float]


def _require_q1(params: HarnessParams):
    if params.q != 1:
        raise InvalidParams(f"this module serves q = 1, got q={params.q}")
    if not (params.eta > 0 and params.theta > 0):
        raise InvalidParams(
            f"q = 1 needs η, θ > 0 (normalise with --normalize), got η={params.eta}, θ={params.theta}"
        )


def boundary_time(params: HarnessParams) -> float:
    return float(params.theta) / float(params.eta)


def transition_params(s: float, t: float, x: float, params: HarnessParams) -> MeixnerParams:
    """θ̃ = tη + θ − 2sη, τ̃ = η(θ − sη)(t − s), t̃ = (1 + ηx)(t − s)."""
    _require_q1(params)
    eta, theta = float(params.eta), float(params.theta)
    if not 0 <= s < t:
        raise InvalidParams(f"need 0 <= s < t, got s={s}, t={t}")
    if x < -1 / eta - 1e-12:
        raise InvalidParams(f"state x={x} lies below -1/η={-1 / eta}")
    return MeixnerParams(
        theta_tilde=t * eta + theta - 2 * s * eta,
        tau_tilde=eta * (theta - s * eta) * (t - s),
        t_tilde=max((1 + eta * x) * (t - s), 0.0),
    )


def identify_meixner(mp: MeixnerParams) -> DistributionSpec:
    """Law of Y with orthogonal p̃_n(Y), as an affine image of a standard family."""
    th, tau, tt = mp.theta_tilde, mp.tau_tilde, mp.t_tilde
    scale_ref = max(1.0, th**2, abs(tau))
    if abs(tt) <= DISCRIMINANT_TOL * scale_ref:
        return DistributionSpec(POINT_MASS)

    if abs(tau) <= DISCRIMINANT_TOL * scale_ref:
        if th == 0:
            raise UnidentifiableRegime("τ̃ = θ̃ = 0 is the Gaussian case, outside the q = 1 families")
        return DistributionSpec(POISSON, scale=th, shift=-tt / th, args={"lam": tt / th**2})

    disc = mp.discriminant
    if tau < 0:
        n = -tt / tau
        if abs(n - round(n)) > INTEGER_TOL * max(1.0, abs(n)):
            raise UnidentifiableRegime(f"−t̃/τ̃ = {n} is not a natural number")
        root = math.sqrt(disc)
        return DistributionSpec(
            BINOMIAL,
            scale=root,
            shift=tt / (2 * tau) * (root - th),
            args={"n": float(round(n)), "p": 0.5 * (1 - th / root)},
        )

    if abs(disc) <= DISCRIMINANT_TOL * scale_ref:
        return DistributionSpec(
            GAMMA,
            scale=math.copysign(1.0, th),
            shift=-2 * tt / th,
            args={"r": tt / tau, "sigma": abs(th) / 2},
        )
    if disc > 0:
        root = math.sqrt(disc)
        sign = math.copysign(1.0, th)
        return DistributionSpec(
            NEGATIVE_BINOMIAL,
            scale=sign * root,
            shift=-sign * (abs(th) - root) / (2 * tau) * tt,
            args={"r": tt / tau, "p": 2 * root / (abs(th) + root)},
        )
    raise UnidentifiableRegime(f"θ̃² < 4τ̃ (discriminant {disc}) has no q = 1 family")


def regime_report(s: float, t: float, x: float, params: HarnessParams) -> RegimeReport:
    mp = transition_params(s, t, x, params)
    spec = identify_meixner(mp)
    return RegimeReport(
        s=s,
        t=t,
        x=x,
        theta_tilde=mp.theta_tilde,
        tau_tilde=mp.tau_tilde,
        t_tilde=mp.t_tilde,
        discriminant=mp.discriminant,
        family=spec.family,
        scale=spec.scale,
        shift=spec.shift,
        args=spec.args,
    )


def sample_table1(spec: DistributionSpec, rng: np.random.Generator, size: Optional[int] = None):
    """Draws scale * Z + shift with Z from ``spec.family``."""
    a = spec.args
    if spec.family == POINT_MASS:
        z = np.zeros(size) if size is not None else 0.0
    elif spec.family == POISSON:
        z = rng.poisson(a["lam"], size)
    elif spec.family == GAMMA:
        z = rng.gamma(a["r"], a["sigma"], size)
    elif spec.family == NEGATIVE_BINOMIAL:
        z = rng.negative_binomial(a["r"], a["p"], size)
    else:
        z = rng.binomial(int(a["n"]), a["p"], size)
    return spec.scale * z + spec.shift


# --- Latent Z-chain ---

def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12)


def y_from_z(t: float, z, params: HarnessParams):
    """Y_t = (θ − ηt)Z_t − t/θ before θ/η, Z − 1/η at θ/η, (ηt − θ)Z_t − 1/η after."""
    eta, theta = float(params.eta), float(params.theta)
    b = theta / eta
    if _close(t, b):
        return z - 1 / eta
    if t < b:
        return (theta - eta * t) * z - t / theta
    return (eta * t - theta) * z - 1 / eta


def z_step(s: float, t: float, z: np.ndarray, rng: np.random.Generator, params: HarnessParams) -> np.ndarray:
    """Z_t given Z_s = z in the regime fixed by where s and t sit relative to θ/η."""
    eta, theta = float(params.eta), float(params.theta)
    b = theta / eta
    r = 1 / (theta * eta) + z
    if _close(t, b):
        return rng.gamma(r, theta - eta * s)
    if t < b:
        return z + rng.negative_binomial(r, (theta - eta * t) / (theta - eta * s))
    if _close(s, b):
        return rng.poisson(z / (eta * t - theta)).astype(float)
    if s > b:
        counts = np.rint(z)
        if not np.allclose(counts, z, atol=1e-9):
            raise InvalidParams("binomial thinning needs an integer-valued latent state")
        return rng.binomial(counts.astype(np.int64), (eta * s - theta) / (eta * t - theta)).astype(float)
    # s < θ/η < t in one step
    return rng.negative_binomial(r, (t * eta - theta) / (eta * (t - s))).astype(float)


def _internal_grid(grid: np.ndarray, b: float, through_boundary: bool) -> np.ndarray:
    if not through_boundary or any(_close(t, b) for t in grid):
        return grid
    if grid[0] < b < grid[-1]:
        return np.sort(np.append(grid, b))
    return grid


def sample_q1_paths(
    grid: Sequence[float], seed: int, n_paths: int, params: HarnessParams, through_boundary: bool = True
) -> PathEnsemble:
    """Exact simulation of Y on ``grid`` through the latent Z-chain.

    With ``through_boundary`` the step that straddles θ/η is split there
    (Gamma then Poisson); otherwise it is one negative binomial step. The
    inserted boundary time is not reported.
    """
    _require_q1(params)
    grid = validate_grid(grid)
    b = boundary_time(params)
    steps = _internal_grid(grid, b, through_boundary)
    rng = np.random.default_rng(seed)

    z = np.zeros(n_paths)
    values = {0.0: y_from_z(0.0, z, params)}
    for s, t in zip(steps[:-1], steps[1:]):
        z = np.asarray(z_step(s, t, z, rng, params), dtype=float)
        values[float(t)] = y_from_z(t, z, params)
    paths = np.column_stack([values[float(t)] for t in grid])
    logger.info(f"sampled {n_paths} q=1 paths over {len(steps) - 1} steps (boundary θ/η={b:g})")
    return PathEnsemble(grid, paths, seed)


def sample_q1_path(grid: Sequence[float], seed: int, params: HarnessParams, through_boundary: bool = True) -> Trajectory:
    return sample_q1_paths(grid, seed, 1, params, through_boundary).trajectory(0)


def marginal_moments(t: float, params: HarnessParams) -> Dict[int, float]:
    """E Y_t^k for k = 1..4 from the Meixner coefficients at s = 0, x = 0."""
    mp = transition_params(0.0, t, 0.0, params)
    th, tau, tt = mp.theta_tilde, mp.tau_tilde, mp.t_tilde
    return {1: 0.0, 2: tt, 3: th * tt, 4: 3 * tt**2 + (th**2 + 2 * tau) * tt}


# --- Checks ---

def check_q1_moments(grid: Sequence[float], seed: int, n_paths: int, params: HarnessParams) -> pd.DataFrame:
    """Sample moments of Y_t against ``marginal_moments`` at each positive grid time.

    ``z`` is the largest |sample − exact| / standard error over the four moments.
    """
    ensemble = sample_q1_paths(grid, seed, n_paths, params)
    records = []
    for k, t in enumerate(ensemble.grid):
        if t == 0:
            continue
        y = ensemble.paths[:, k]
        exact = marginal_moments(float(t), params)
        for order in range(1, 5):
            powers = y**order
            se = powers.std(ddof=1) / np.sqrt(n_paths)
            estimate = float(powers.mean())
            records.append(
                {
                    "t": float(t),
                    "moment": order,
                    "sample": estimate,
                    "exact": exact[order],
                    "se": float(se),
                    "z": abs(estimate - exact[order]) / se if se > 0 else 0.0,
                }
            )
    return pd.DataFrame.from_records(records)


def straddle_ks(s: float, t: float, seed: int, n_paths: int, params: HarnessParams) -> float:
    """KS distance between Y_t sampled in one step over θ/η and through θ/η."""
    b = boundary_time(params)
    if not s < b < t:
        raise InvalidParams(f"({s}, {t}) does not straddle θ/η={b}")
    grid = [0.0, s, t] if s > 0 else [0.0, t]
    one_step = sample_q1_paths(grid, seed, n_paths, params, through_boundary=False).paths[:, -1]
    two_step = sample_q1_paths(grid, seed + 1, n_paths, params, through_boundary=True).paths[:, -1]
    return float(ks_2samp(one_step, two_step).statistic)


def layout_families(params: HarnessParams) -> List[Dict]:
    """Identified family for each placement of (s, t) relative to θ/η.

    Before, ending at, starting at, after and straddling θ/η give NB, Gamma,
    Poisson, binomial and NB. The state after θ/η is reachable (Z_s = 3).
    """
    _require_q1(params)
    eta, theta = float(params.eta), float(params.theta)
    b = theta / eta
    layouts = [
        ("before", b / 4, b / 2, 0.0, NEGATIVE_BINOMIAL),
        ("ending", b / 2, b, 0.0, GAMMA),
        ("starting", b, 2 * b, 1.0, POISSON),
        ("after", 2 * b, 3 * b, (2 * eta * b - theta) * 3 - 1 / eta, BINOMIAL),
        ("straddling", b / 2, 2 * b, 0.0, NEGATIVE_BINOMIAL),
    ]
    rows = []
    for name, s, t, x, expected in layouts:
        found = identify_meixner(transition_params(s, t, x, params)).family
        rows.append({"layout": name, "s": s, "t": t, "x": x, "expected": expected, "found": found})
    return rows

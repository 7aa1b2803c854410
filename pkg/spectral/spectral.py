"""Orthogonality measures of the p- and Q-families by Jacobi-matrix quadrature.

Nodes are the eigenvalues of the truncated symmetric Jacobi matrix and the
weights are the squared first components of its normalised eigenvectors
(Golub-Welsch). Everything here is floating point and needs |q| < 1.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, eigh_tridiagonal

from algebra.polynomials import P_FAMILY, Q_FAMILY, OrthoRecurrence, coeff_B, recurrence_for
from core.errors import DegenerateAC, EigenFailure, InvalidParams, NegativeBeta, NumericFailure
from core.params import HarnessParams

logger = logging.getLogger(__name__)

# --- Configuration ---
DEFAULT_N = 200
TOL_CLAMP = 1e-12
MAX_ATOMS = 200


@dataclass(frozen=True, eq=False)
class JacobiMatrix:
    """Symmetric tridiagonal realisation of a monic recurrence.

    ``order`` may be smaller than the requested size when some B_n vanishes;
    the measure is then finitely supported on ``order`` points.
    """

    order: int
    diag: np.ndarray
    subdiag: np.ndarray
    truncated_at: Optional[int] = None


@dataclass(frozen=True, eq=False)
class QuadratureMeasure:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise ValueError("nodes and weights differ in length")

    def __len__(self):
        return len(self.nodes)

    def expect(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    def moment(self, k: int) -> float:
        return float(np.dot(self.weights, self.nodes**k))

    def to_frame(self):
        return pd.DataFrame({"node": self.nodes, "weight": self.weights})

    def to_dict(self):
        return {"nodes": self.nodes.tolist(), "weights": self.weights.tolist()}


def point_mass(x: float = 0.0) -> QuadratureMeasure:
    return QuadratureMeasure(np.array([float(x)]), np.array([1.0]))


def require_open_q(params: HarnessParams):
    if not -1 < params.q < 1:
        raise InvalidParams(f"quadrature needs |q| < 1, got q={params.q}; use the exact q=±1 modules")


def jacobi_matrix(rec: OrthoRecurrence, N: int, tol_clamp: float = TOL_CLAMP) -> JacobiMatrix:
    """Builds the N x N Jacobi matrix, truncating at the first vanishing B_n.

    A coefficient counts as zero when |B_n| <= tol_clamp * max(1, max_{m<n} |B_m|).
    A B_n below minus that threshold raises NegativeBeta.
    """
    if N < 1:
        raise InvalidParams(f"quadrature order must be positive, got N={N}")
    diag = [float(rec.diag(0))]
    betas: List[float] = []
    scale = 1.0
    truncated_at = None
    for n in range(1, N):
        b = float(rec.offdiag(n))
        threshold = tol_clamp * scale
        if b < -threshold:
            raise NegativeBeta(n, b)
        if b <= threshold:
            truncated_at = n
            logger.debug(f"B_{n} = {b:.3e} treated as zero; measure has {n} atoms ({rec.label})")
            break
        betas.append(b)
        diag.append(float(rec.diag(n)))
        scale = max(scale, abs(b))
    return JacobiMatrix(
        order=len(diag),
        diag=np.array(diag),
        subdiag=np.sqrt(np.array(betas)),
        truncated_at=truncated_at,
    )


def quadrature(rec: OrthoRecurrence, N: int = DEFAULT_N) -> QuadratureMeasure:
    """Gauss quadrature of the measure orthogonalising ``rec``."""
    jm = jacobi_matrix(rec, N)
    if jm.order == 1:
        return point_mass(jm.diag[0])
    try:
        nodes, vectors = eigh_tridiagonal(jm.diag, jm.subdiag)
    except (LinAlgError, ValueError) as e:
        raise EigenFailure(f"tridiagonal eigensolver failed for {rec.label}: {e}") from e

    weights = vectors[0, :] ** 2
    weights /= weights.sum()
    return QuadratureMeasure(nodes, weights)


def functional_moments(rec: OrthoRecurrence, k_max: int) -> List:
    """Moments m_0..m_k_max of the functional that makes ``rec`` orthogonal.

    x^m is tracked in the basis of the recurrence polynomials,
    x P_j = P_{j+1} + A_j P_j + B_j P_{j-1}, and m_k is the coordinate at P_0.
    The coefficients may be arrays or numpy ``Polynomial`` objects, in which
    case the moments are arrays or polynomials in the recurrence parameter.
    """
    A = [rec.diag(j) for j in range(k_max + 1)]
    B = [rec.offdiag(j) for j in range(k_max + 2)]
    coords = [1]
    moments = [1]
    for _ in range(k_max):
        size = len(coords) + 1
        padded = coords + [0, 0]
        new = []
        for j in range(size):
            value = A[j] * padded[j] + B[j + 1] * padded[j + 1]
            if j >= 1:
                value = value + padded[j - 1]
            new.append(value)
        coords = new
        moments.append(coords[0])
    return moments


# --- Supports ---

def support_interval(t: float, params: HarnessParams) -> Tuple[float, float]:
    """Endpoints of the absolutely continuous part of π_t.

    At t = 0 the law is δ_0 and (0.0, 0.0) is returned.
    """
    require_open_q(params)
    if t < 0:
        raise InvalidParams(f"time must be nonnegative, got t={t}")
    if t == 0:
        return 0.0, 0.0
    eta, theta, q = float(params.eta), float(params.theta), float(params.q)
    gap = eta * theta + 1 - q
    if gap < 0:
        raise InvalidParams(f"ηθ + 1 − q = {gap} < 0")
    if gap == 0:
        raise DegenerateAC("ηθ + 1 − q = 0: the absolutely continuous part collapses")
    centre = theta + t * eta
    half = 2 * math.sqrt(t) * math.sqrt(gap)
    return (centre - half) / (1 - q), (centre + half) / (1 - q)


def atom_free_window(params: HarnessParams) -> Tuple[float, float]:
    """(θ²/(ηθ+1−q), (ηθ+1−q)/η²): times with no discrete atoms; may be empty."""
    eta, theta, q = float(params.eta), float(params.theta), float(params.q)
    gap = eta * theta + 1 - q
    lo = theta**2 / gap if gap > 0 else math.inf
    hi = gap / eta**2 if eta != 0 else math.inf
    return lo, hi


def discrete_atoms(t: float, params: HarnessParams, k_max: int = MAX_ATOMS) -> List[Tuple[float, str]]:
    """Atoms of π_t, tagged ``theta-side`` or ``eta-side``."""
    require_open_q(params)
    eta, theta, q = float(params.eta), float(params.theta), float(params.q)
    gap = eta * theta + 1 - q
    atoms = []
    if t <= 0:
        return atoms
    k = 0
    while k < k_max and theta != 0 and t * gap < q ** (2 * k) * theta**2:
        tq = theta * q**k
        atoms.append((-(tq + t * gap / tq - (t * eta + theta)) / (1 - q), "theta-side"))
        k += 1
    k = 0
    while k < k_max and eta != 0 and t * eta**2 * q ** (2 * k) > gap:
        eq = eta * q**k
        atoms.append((-(t * eq + gap / eq - (t * eta + theta)) / (1 - q), "eta-side"))
        k += 1
    return atoms


def in_support_U(x: float, t: float, params: HarnessParams, n_max: int = DEFAULT_N, tol: float = TOL_CLAMP) -> bool:
    """True iff every partial product of B_1(x,u,t)..B_n(x,u,t) is >= 0 for n <= n_max.

    Scans the factors instead of forming products: the products stay
    nonnegative exactly when no factor is negative before the first zero one.
    """
    u = t + 1
    scale = 1.0
    for n in range(1, n_max + 1):
        b = float(coeff_B(n, x, u, t, params))
        threshold = tol * scale
        if b < -threshold:
            return False
        if b <= threshold:
            return True
        scale = max(scale, abs(b))
    return True


def restrict_to_U(measure: QuadratureMeasure, t: float, params: HarnessParams, n_max: int = DEFAULT_N) -> QuadratureMeasure:
    """Drops the nodes outside U_t and renormalises the remaining weights.

    Gauss rules of measures with atoms or gaps can put small weight on nodes
    where no transition kernel exists; a sampler must never land there.
    """
    inside = np.array([in_support_U(x, t, params, n_max=n_max) for x in measure.nodes])
    if inside.all():
        return measure
    kept = measure.weights[inside].sum()
    if kept <= 0:
        raise NumericFailure(f"no quadrature node lies in U_t at t={t}")
    logger.debug(f"dropped {int((~inside).sum())} nodes outside U_t at t={t:g}, weight {1 - kept:.3e}")
    return QuadratureMeasure(measure.nodes[inside], measure.weights[inside] / kept)


# --- Al-Salam-Chihara form ---

def askey_wilson_params(t: float, params: HarnessParams) -> Tuple[float, float, float, float]:
    """(α, β, a, d) with p_n(αx + β; t)/α^n an Al-Salam–Chihara family in x."""
    require_open_q(params)
    eta, theta, q = float(params.eta), float(params.theta), float(params.q)
    gap = eta * theta + 1 - q
    if t <= 0 or gap <= 0:
        raise InvalidParams(f"reparameterisation needs t > 0 and ηθ+1−q > 0, got t={t}, gap={gap}")
    root = math.sqrt(t) * math.sqrt(gap)
    alpha = 2 * root / (1 - q)
    beta = (theta + t * eta) / (1 - q)
    a = -max(t * eta, theta) / root
    d = -min(t * eta, theta) / root
    return alpha, beta, a, d


def p_recurrence(t: float, params: HarnessParams) -> OrthoRecurrence:
    return recurrence_for(P_FAMILY, params.as_floats(), t=float(t))


def q_recurrence(x, t: float, s: float, params: HarnessParams) -> OrthoRecurrence:
    return recurrence_for(Q_FAMILY, params.as_floats(), t=float(t), x=x, s=float(s))

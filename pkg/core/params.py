"""Process parameters (eta, theta, q) and the scale reduction helper."""
import math
from dataclasses import dataclass, field
from typing import Any, Dict

from core.errors import InvalidParams
from core.qcore import is_exact


@dataclass(frozen=True)
class HarnessParams:
    eta: Any
    theta: Any
    q: Any

    def __post_init__(self):
        if not -1 <= self.q <= 1:
            raise InvalidParams(f"q must lie in [-1, 1], got q={self.q}")
        if 1 + self.eta * self.theta < max(self.q, 0):
            raise InvalidParams(
                f"1+ηθ < max(q,0): 1 + ({self.eta})({self.theta}) < max({self.q}, 0)"
            )

    @property
    def exact(self) -> bool:
        return is_exact(self.eta, self.theta, self.q)

    @property
    def ac_gap(self):
        """ηθ + 1 − q; zero means the absolutely continuous part collapses."""
        return self.eta * self.theta + 1 - self.q

    def strictly_admissible(self) -> bool:
        return 1 + self.eta * self.theta > max(self.q, 0)

    def as_floats(self) -> "HarnessParams":
        return HarnessParams(float(self.eta), float(self.theta), float(self.q))

    def to_dict(self) -> Dict[str, Any]:
        return {"eta": _jsonable(self.eta), "theta": _jsonable(self.theta), "q": _jsonable(self.q)}


def _jsonable(value):
    return str(value) if is_exact(value) and not isinstance(value, int) else value


@dataclass(frozen=True)
class Normalization:
    """X'_t = sign * space * X_{time * t}; the identity map when nothing applies."""

    params: HarnessParams
    sign: int = 1
    time_factor: float = 1.0
    space_factor: float = 1.0
    applied: bool = field(default=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "applied": self.applied,
            "sign": self.sign,
            "time_factor": self.time_factor,
            "space_factor": self.space_factor,
            "params": self.params.to_dict(),
        }


def normalize(params: HarnessParams) -> Normalization:
    """Reduces to eta > 0 (by passing to -X) and then to theta = ±eta (by scaling).

    The returned map sends the original process X to the normalised one:
    X'_t = sign * space_factor * X_{time_factor * t}.
    """
    eta, theta, q = float(params.eta), float(params.theta), float(params.q)
    sign = 1
    if eta < 0 or (eta == 0 and theta < 0):
        eta, theta, sign = -eta, -theta, -1
    if eta * theta == 0:
        return Normalization(HarnessParams(eta, theta, q), sign=sign, applied=sign < 0)

    time_factor = abs(theta) / eta
    space_factor = math.sqrt(eta / abs(theta))
    scale = math.sqrt(eta * abs(theta))
    reduced = HarnessParams(scale, math.copysign(scale, theta), q)
    return Normalization(reduced, sign, time_factor, space_factor, applied=True)

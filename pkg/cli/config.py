"""Validated run configuration shared by every sub-command."""
import logging
import math
import os
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ValidationError, field_validator

from core.errors import InvalidParams
from core.params import HarnessParams, Normalization, normalize
from spectral.spectral import DEFAULT_N

logger = logging.getLogger(__name__)

DEFAULT_SEED = 0
DEFAULT_PATHS = 1000
DEFAULT_TUPLES = 20
DEFAULT_N_MAX = 8
DEFAULT_OUTPUT_DIR = "data/runs"
SEED_ENV = "QHARNESS_SEED"

OPEN, Q_ONE, Q_MINUS_ONE = "open", "q1", "qm1"


def default_seed() -> int:
    value = os.environ.get(SEED_ENV)
    if value is None:
        return DEFAULT_SEED
    try:
        return int(value)
    except ValueError:
        raise InvalidParams(f"{SEED_ENV}={value!r} is not an integer")


def parse_grid(text: str) -> List[float]:
    """``start:stop:step`` (stop included when hit) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(part) for part in text.split(":"))
        except ValueError:
            raise ValueError(f"grid {text!r} is not start:stop:step")
        if step <= 0 or stop < start:
            raise ValueError(f"grid {text!r} needs step > 0 and stop >= start")
        count = math.floor((stop - start) / step + 1e-9)
        return [start + i * step for i in range(count + 1)]
    return parse_times(text)


def parse_times(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"{text!r} is not a comma-separated list of numbers")


def _strictly_increasing(values: List[float], what: str) -> List[float]:
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{what} must be strictly increasing, got {values}")
    return values


class RunConfig(BaseModel):
    eta: float = 0.0
    theta: float = 0.0
    q: float = 0.0
    grid: Optional[List[float]] = None
    times: Optional[List[float]] = None
    t: Optional[float] = None
    s: float = 0.0
    x: Optional[float] = None
    N: int = DEFAULT_N
    n_max: int = DEFAULT_N_MAX
    seed: int = DEFAULT_SEED
    paths: int = DEFAULT_PATHS
    tuples: int = DEFAULT_TUPLES
    tolerance: Optional[float] = None
    output: Optional[str] = None
    fmt: Literal["csv", "json"] = "csv"
    normalize: bool = False
    through_boundary: bool = True
    db: Optional[str] = None

    @field_validator("grid", mode="before")
    @classmethod
    def _grid(cls, value):
        if isinstance(value, str):
            value = parse_grid(value)
        return value

    @field_validator("times", mode="before")
    @classmethod
    def _times(cls, value):
        if isinstance(value, str):
            value = parse_times(value)
        return value

    @field_validator("grid")
    @classmethod
    def _grid_order(cls, value):
        if value is not None:
            if not value or value[0] != 0:
                raise ValueError("grid must start at 0")
            _strictly_increasing(value, "grid")
        return value

    @field_validator("times")
    @classmethod
    def _times_order(cls, value):
        if value is not None:
            if any(v < 0 for v in value):
                raise ValueError("times must be nonnegative")
            _strictly_increasing(value, "times")
        return value

    @field_validator("N", "n_max", "paths", "tuples")
    @classmethod
    def _positive(cls, value):
        if value < 1:
            raise ValueError("must be a positive integer")
        return value

    def harness_params(self) -> Tuple[HarnessParams, Normalization]:
        params = HarnessParams(self.eta, self.theta, self.q)
        if not self.normalize:
            return params, Normalization(params)
        reduction = normalize(params)
        logger.info(f"normalised (η, θ) = ({self.eta}, {self.theta}) -> ({reduction.params.eta}, {reduction.params.theta})")
        return reduction.params, reduction

    def require_times(self, count: int, default: Tuple[float, ...]) -> Tuple[float, ...]:
        times = tuple(self.times) if self.times else default
        if len(times) != count:
            raise InvalidParams(f"expected {count} times, got {len(times)}: {times}")
        return times


def regime(params: HarnessParams) -> str:
    if params.q == 1:
        return Q_ONE
    if params.q == -1:
        return Q_MINUS_ONE
    return OPEN


def build_config(**options) -> RunConfig:
    """RunConfig from parsed options; validation problems become InvalidParams."""
    options = {k: v for k, v in options.items() if v is not None}
    options.setdefault("seed", default_seed())
    try:
        return RunConfig(**options)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        raise InvalidParams(f"{where}: {first['msg']}")

import math
from typing import Any, Dict, Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class CheckReport(BaseModel):
    """One line of a check run: {check, params, residual, tolerance, pass}."""

    model_config = ConfigDict(populate_by_name=True)

    check: str
    params: Dict[str, Any] = Field(default_factory=dict)
    residual: Union[float, str]
    tolerance: Optional[float] = None
    passed: bool = Field(alias="pass")
    details: Dict[str, Any] = Field(default_factory=dict)

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True)


def check_report(check: str, params: Dict[str, Any], residual: float, tolerance: float, **details) -> CheckReport:
    passed = math.isfinite(residual) and residual <= tolerance
    return CheckReport(
        check=check,
        params=params,
        residual=float(residual),
        tolerance=tolerance,
        passed=passed,
        details=details,
    )

from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict


class Violation(BaseModel):
    unit: str
    index: Optional[int] = None
    rule: str
    detail: str = ""


class ValidationReport(BaseModel):
    violations: List[Violation] = []

    @property
    def ok(self) -> bool:
        return not self.violations


class StorageRhoBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    rho_min_s: float
    rho_max_s: float


class RequirementRow(BaseModel):
    k: int
    profile: str
    demand: float
    requirement_2: bool
    requirement_3: bool

    @property
    def passed(self) -> bool:
        return self.requirement_2 and self.requirement_3


class RequirementReport(BaseModel):
    requirement_1: str = "assumed"
    thermal_min: float
    thermal_max: float
    rows: List[RequirementRow] = []
    passed: bool = True

    @property
    def failed_steps(self) -> List[int]:
        return sorted({row.k for row in self.rows if not row.passed})


class DroopInterval(BaseModel):
    unit: str
    index: int
    rho_low: float
    rho_high: float

    @property
    def width(self) -> float:
        return self.rho_high - self.rho_low


class OverlapReport(BaseModel):
    intervals: List[DroopInterval] = []
    hulls: dict[str, Tuple[float, float]] = {}
    overlapping_pairs: List[Tuple[str, str]] = []
    non_overlapping: bool = True
    ordered: bool = True
    passed: bool = True

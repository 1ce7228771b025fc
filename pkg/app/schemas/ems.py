from itertools import product
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field

from app.core.config import settings
from app.schemas.bands import BinaryMatrix, ValueBase, Vector
from app.schemas.enum import ScenarioPolicy, Solver


class EmsOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    np_steps: int = Field(default=settings.prediction_horizon, ge=1)
    scenario_policy: ScenarioPolicy = ScenarioPolicy.extremes
    alpha_grid_size: int = Field(default=11, ge=2)
    solver: Solver = Solver.branch_and_bound
    max_switches: int = Field(default=settings.max_switches, ge=0)
    max_nodes: Optional[int] = Field(default=settings.max_nodes, ge=1)
    tolerance: float = Field(default=settings.tolerance, ge=0)


class SolverStats(BaseModel):
    nodes_explored: int = 0
    plans_evaluated: int = 0
    optimal: bool = True
    cap_pruned: bool = False
    budget_exhausted: bool = False


class CommitmentPlan(ValueBase):
    delta: BinaryMatrix
    worst_case_cost: float
    per_scenario_costs: Dict[str, float]
    stats: SolverStats = SolverStats()

    @property
    def first(self):
        return self.delta[:, 0]

    def shifted(self):
        """Plan for the next sampling instant: drop the applied column, hold the last one."""
        return self.delta[:, list(range(1, self.delta.shape[1])) + [self.delta.shape[1] - 1]]


class ScenarioRegret(BaseModel):
    scenario: str
    candidate_cost: Optional[float] = None
    optimal_cost: Optional[float] = None
    regret: Optional[float] = None
    infeasible: Optional[str] = None


class RegretReport(BaseModel):
    max_regret: Optional[float]
    scenarios: Dict[str, ScenarioRegret]
    evaluated_controls: int = 0


class SetpointGrid(ValueBase):
    """Candidate setpoint values per unit; a control is one value per unit per step."""

    u_t: List[Vector]
    u_s: List[Vector]
    u_r: List[Vector]

    @property
    def per_step(self) -> int:
        return int(np.prod([len(v) for v in (*self.u_t, *self.u_s, *self.u_r)]))

    def controls(self) -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
        n_t, n_s = len(self.u_t), len(self.u_s)
        for values in product(*self.u_t, *self.u_s, *self.u_r):
            arr = np.array(values, dtype=float)
            yield arr[:n_t], arr[n_t:n_t + n_s], arr[n_t + n_s:]


class SweepCell(BaseModel):
    s: int
    alpha: float
    controller: str
    total_cost: Optional[float] = None
    runtime_ms: float = 0.0
    status: str = "ok"


class OracleReport(BaseModel):
    instances: int
    mismatches: int
    max_cost_gap: float
    infeasible_instances: int = 0
    regret: Optional[RegretReport] = None
    tolerance: float

    @computed_field
    @property
    def passed(self) -> bool:
        regret_ok = self.regret is None or (
            self.regret.max_regret is not None and self.regret.max_regret <= self.tolerance
        )
        return self.mismatches == 0 and regret_ok

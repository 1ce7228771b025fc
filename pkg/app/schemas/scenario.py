from typing import List, Sequence

import numpy as np
from pydantic import model_validator

from app.schemas.bands import (
    BinaryMatrix,
    BinaryVector,
    DisturbanceSample,
    Matrix,
    ValueBase,
    Vector,
)
from app.schemas.dispatch import Dispatch


class DisturbanceTrajectory(ValueBase):
    """Per-step renewable availability (N x n_r) and loads (N x n_d)."""

    w_r: Matrix
    w_d: Matrix

    @model_validator(mode="after")
    def _check(self) -> "DisturbanceTrajectory":
        if self.w_r.shape[0] != self.w_d.shape[0]:
            raise ValueError(f"w_r has {self.w_r.shape[0]} steps but w_d has {self.w_d.shape[0]}")
        if (self.w_r < 0).any():
            raise ValueError("available renewable power w_r must be >= 0")
        if (self.w_d > 0).any():
            raise ValueError("load w_d must be <= 0")
        return self

    def __len__(self) -> int:
        return self.w_d.shape[0]

    @property
    def n_r(self) -> int:
        return self.w_r.shape[1]

    @property
    def n_d(self) -> int:
        return self.w_d.shape[1]

    @property
    def demand(self) -> np.ndarray:
        return -self.w_d.sum(axis=1)

    def sample(self, k: int) -> DisturbanceSample:
        return DisturbanceSample(w_r=self.w_r[k], w_d=self.w_d[k])

    def window(self, start: int, length: int) -> "DisturbanceTrajectory":
        return DisturbanceTrajectory(
            w_r=self.w_r[start:start + length],
            w_d=self.w_d[start:start + length],
        )


class ForecastBounds(ValueBase):
    lower: DisturbanceTrajectory
    upper: DisturbanceTrajectory
    ts: float

    @model_validator(mode="after")
    def _check(self) -> "ForecastBounds":
        if self.lower.w_r.shape != self.upper.w_r.shape or self.lower.w_d.shape != self.upper.w_d.shape:
            raise ValueError("lower and upper bound profiles differ in shape")
        if (self.lower.w_r > self.upper.w_r).any() or (self.lower.w_d > self.upper.w_d).any():
            raise ValueError("w_min must not exceed w_max")
        return self

    def __len__(self) -> int:
        return len(self.lower)

    @property
    def is_degenerate(self) -> bool:
        return bool(
            np.array_equal(self.lower.w_r, self.upper.w_r)
            and np.array_equal(self.lower.w_d, self.upper.w_d)
        )

    def window(self, start: int, length: int) -> "ForecastBounds":
        return ForecastBounds(
            lower=self.lower.window(start, length),
            upper=self.upper.window(start, length),
            ts=self.ts,
        )

    @classmethod
    def degenerate(cls, trajectory: DisturbanceTrajectory, ts: float) -> "ForecastBounds":
        return cls(lower=trajectory, upper=trajectory, ts=ts)


class SimLog(ValueBase):
    """
    Realized closed-loop or rollout trajectory.

    Row k holds the step that moved the grid from x(k-1) to x(k); `x_0` and
    `delta_0` are the initial energy and commitment.
    """

    ts: float
    x_0: Vector
    delta_0: BinaryVector
    rho: Vector
    p_t: Matrix
    p_s: Matrix
    p_r: Matrix
    x: Matrix
    delta: BinaryMatrix
    w_r: Matrix
    w_d: Matrix
    stage_cost: Vector

    @model_validator(mode="after")
    def _check_chain(self) -> "SimLog":
        if self.x.shape[0] == 0:
            return self
        previous = np.vstack([self.x_0[None, :], self.x[:-1]])
        drift = np.abs(previous - self.ts * self.p_s - self.x)
        if drift.size and drift.max() > 1e-9:
            raise ValueError(f"storage energies do not chain (max drift {drift.max():.3g})")
        return self

    def __len__(self) -> int:
        return self.rho.shape[0]

    @property
    def total_cost(self) -> float:
        return float(self.stage_cost.sum())

    @property
    def thermal_energy(self) -> float:
        return float(self.ts * self.p_t.sum())

    @property
    def renewable_energy(self) -> float:
        return float(self.ts * self.p_r.sum())

    def dispatch(self, k: int) -> Dispatch:
        """Rebuild the dispatch record of row k (flags are not stored in the log)."""
        residual = float(self.p_t[k].sum() + self.p_s[k].sum() + self.p_r[k].sum() + self.w_d[k].sum())
        return Dispatch(
            p_t=self.p_t[k],
            p_s=self.p_s[k],
            p_r=self.p_r[k],
            rho=float(self.rho[k]),
            saturated=(),
            residual=residual,
        )

    @classmethod
    def from_steps(
            cls,
            ts: float,
            x_0: np.ndarray,
            delta_0: np.ndarray,
            dispatches: Sequence[Dispatch],
            deltas: Sequence[np.ndarray],
            states: Sequence[np.ndarray],
            samples: Sequence[DisturbanceSample],
            stage_costs: List[float],
    ) -> "SimLog":
        n_t, n_s = len(delta_0), len(x_0)
        n_r = samples[0].w_r.shape[0] if samples else 0
        n_d = samples[0].w_d.shape[0] if samples else 0

        def stack(rows: Sequence[np.ndarray], width: int) -> np.ndarray:
            return np.array(rows, dtype=float).reshape(len(rows), width)

        return cls(
            ts=ts,
            x_0=x_0,
            delta_0=delta_0,
            rho=np.array([d.rho for d in dispatches], dtype=float),
            p_t=stack([d.p_t for d in dispatches], n_t),
            p_s=stack([d.p_s for d in dispatches], n_s),
            p_r=stack([d.p_r for d in dispatches], n_r),
            x=stack(states, n_s),
            delta=np.array(deltas, dtype=np.int8).reshape(len(deltas), n_t),
            w_r=stack([s.w_r for s in samples], n_r),
            w_d=stack([s.w_d for s in samples], n_d),
            stage_cost=np.array(stage_costs, dtype=float),
        )

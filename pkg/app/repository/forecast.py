import logging
from pathlib import Path
from typing import IO, Optional, Union

import numpy as np
import pandas as pd

from app.control.scenario import load_bounds_csv
from app.core.config import settings
from app.schemas.scenario import DisturbanceTrajectory, ForecastBounds

logger = logging.getLogger("mg_opcon.repository")

Target = Union[str, Path, IO[str]]


def _block(values: np.ndarray, prefix: str) -> dict:
    return {f"{prefix}_{i + 1}": values[:, i] for i in range(values.shape[1])}


class ForecastRepository:
    """Bounds and trajectory CSV files; `k` counts sampling steps from 0."""

    def __init__(self, path: Optional[Union[str, Path]] = None) -> None:
        self.path = None if path is None else Path(path)

    def load(self, ts: float = settings.ts_hours, source_step_hours: Optional[float] = None) -> ForecastBounds:
        bounds = load_bounds_csv(self.path, ts=ts, source_step_hours=source_step_hours)
        logger.debug(f"Loaded {len(bounds)} bound steps from {self.path}")
        return bounds

    @staticmethod
    def bounds_frame(bounds: ForecastBounds) -> pd.DataFrame:
        columns = {"k": np.arange(len(bounds))}
        columns.update(_block(bounds.lower.w_r, "wr_min"))
        columns.update(_block(bounds.upper.w_r, "wr_max"))
        columns.update(_block(bounds.lower.w_d, "wd_min"))
        columns.update(_block(bounds.upper.w_d, "wd_max"))
        return pd.DataFrame(columns)

    @staticmethod
    def trajectory_frame(trajectory: DisturbanceTrajectory) -> pd.DataFrame:
        columns = {"k": np.arange(len(trajectory))}
        columns.update(_block(trajectory.w_r, "w_r"))
        columns.update(_block(trajectory.w_d, "w_d"))
        return pd.DataFrame(columns)

    def write_bounds(self, bounds: ForecastBounds, target: Target) -> None:
        self.bounds_frame(bounds).to_csv(target, index=False)

    def write_trajectory(self, trajectory: DisturbanceTrajectory, target: Target) -> None:
        self.trajectory_frame(trajectory).to_csv(target, index=False)

from typing import Tuple

import numpy as np

from app.schemas.bands import DisturbanceSample, GridState, Setpoints, ValueBase, Vector
from app.schemas.enum import SaturationState


class StoragePowerBounds(ValueBase):
    p_min: Vector
    p_max: Vector


class Dispatch(ValueBase):
    p_t: Vector
    p_s: Vector
    p_r: Vector
    rho: float
    saturated: Tuple[SaturationState, ...]
    residual: float

    @property
    def powers(self) -> np.ndarray:
        return np.concatenate([self.p_t, self.p_s, self.p_r])


class DispatchRequest(ValueBase):
    """One `{setpoints, disturbance, state}` record as read by `mg-opcon dispatch`."""

    setpoints: Setpoints
    disturbance: DisturbanceSample
    state: GridState

from functools import cached_property
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.config import settings
from app.schemas.bands import GridState, as_binary, as_vector
from app.schemas.enum import RenewableKind


class ThermalUnit(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_min: float
    p_max: float
    chi: float = 1.0
    c_fuel: float = 0.0
    c_on: float = 0.0
    c_sw: float = 0.0


class StorageUnit(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_min: float
    p_max: float
    chi: float = 1.0
    x_min: float
    x_max: float
    c_st: float = 0.0


class RenewableUnit(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_min: float = 0.0
    p_rated: Optional[float] = None
    chi: float = 1.0
    kind: RenewableKind = RenewableKind.wind


def _vec(values) -> np.ndarray:
    return as_vector(list(values))


class FleetParams(BaseModel):
    """
    Physical limits, droop gains and cost weights of every unit in the microgrid.

    Invariants are not enforced on construction; `app.control.model.validate_params`
    reports every violation so a broken configuration can be inspected as a whole.
    Per-type vectors are cached on first access.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    thermal: Tuple[ThermalUnit, ...] = ()
    storage: Tuple[StorageUnit, ...] = ()
    renewable: Tuple[RenewableUnit, ...] = ()
    n_loads: int = 1
    ts: float = Field(default=settings.ts_hours, alias="ts_hours")

    @property
    def n_t(self) -> int:
        return len(self.thermal)

    @property
    def n_s(self) -> int:
        return len(self.storage)

    @property
    def n_r(self) -> int:
        return len(self.renewable)

    @cached_property
    def thermal_p_min(self) -> np.ndarray:
        return _vec(u.p_min for u in self.thermal)

    @cached_property
    def thermal_p_max(self) -> np.ndarray:
        return _vec(u.p_max for u in self.thermal)

    @cached_property
    def thermal_chi(self) -> np.ndarray:
        return _vec(u.chi for u in self.thermal)

    @cached_property
    def storage_p_min(self) -> np.ndarray:
        return _vec(u.p_min for u in self.storage)

    @cached_property
    def storage_p_max(self) -> np.ndarray:
        return _vec(u.p_max for u in self.storage)

    @cached_property
    def storage_chi(self) -> np.ndarray:
        return _vec(u.chi for u in self.storage)

    @cached_property
    def x_min(self) -> np.ndarray:
        return _vec(u.x_min for u in self.storage)

    @cached_property
    def x_max(self) -> np.ndarray:
        return _vec(u.x_max for u in self.storage)

    @cached_property
    def renewable_p_min(self) -> np.ndarray:
        return _vec(u.p_min for u in self.renewable)

    @cached_property
    def renewable_chi(self) -> np.ndarray:
        return _vec(u.chi for u in self.renewable)

    @cached_property
    def p_rated(self) -> np.ndarray:
        # nan where the unit has no configured rating
        return _vec(np.nan if u.p_rated is None else u.p_rated for u in self.renewable)


class SetpointLimits(BaseModel):
    model_config = ConfigDict(frozen=True)

    u_min: float = settings.u_min
    u_max: float = settings.u_max


class InitialState(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: Tuple[float, ...] = ()
    delta: Tuple[int, ...] = ()


class FleetConfig(BaseModel):
    """Schema of `fleet.json`."""
    model_config = ConfigDict(frozen=True)

    thermal: Tuple[ThermalUnit, ...] = ()
    storage: Tuple[StorageUnit, ...] = ()
    renewable: Tuple[RenewableUnit, ...] = ()
    n_loads: int = 1
    ts_hours: float = settings.ts_hours
    u_min: float = settings.u_min
    u_max: float = settings.u_max
    initial_state: InitialState = InitialState()

    @cached_property
    def params(self) -> FleetParams:
        return FleetParams(
            thermal=self.thermal,
            storage=self.storage,
            renewable=self.renewable,
            n_loads=self.n_loads,
            ts=self.ts_hours,
        )

    @property
    def limits(self) -> SetpointLimits:
        return SetpointLimits(u_min=self.u_min, u_max=self.u_max)

    @property
    def state0(self) -> GridState:
        x = self.initial_state.x or tuple(u.x_min for u in self.storage)
        delta = self.initial_state.delta or (0,) * len(self.thermal)
        return GridState(x=as_vector(list(x)), delta_prev=as_binary(list(delta)))

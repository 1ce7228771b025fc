import numpy as np
import pytest

from app.cli.dependencies import BUNDLED_DAY1
from app.control.scenario import load_bounds_csv
from app.control.setpoint import constant_setpoints
from app.schemas.cost import CostWeights
from app.schemas.fleet import FleetConfig, FleetParams, RenewableUnit, StorageUnit, ThermalUnit
from app.schemas.scenario import DisturbanceTrajectory, ForecastBounds

CASE_STUDY = {
    "thermal": [{"p_min": 0.2, "p_max": 1.0, "chi": 1.0, "c_fuel": 1.0, "c_on": 0.2, "c_sw": 0.3}],
    "storage": [{"p_min": -1.0, "p_max": 1.0, "chi": 1.0, "x_min": 0.0, "x_max": 6.0, "c_st": 0.9}],
    "renewable": [
        {"p_min": 0.0, "p_rated": 1.2, "chi": 1.0, "kind": "wind"},
        {"p_min": 0.0, "p_rated": 0.55, "chi": 1.0, "kind": "pv"},
    ],
    "n_loads": 1,
    "ts_hours": 0.25,
    "u_min": -5.0,
    "u_max": 5.0,
    "initial_state": {"x": [2.0], "delta": [0]},
}

RATED = (1.2, 0.55)


@pytest.fixture
def fleet_config() -> FleetConfig:
    return FleetConfig.model_validate(CASE_STUDY)


@pytest.fixture
def params(fleet_config: FleetConfig) -> FleetParams:
    return fleet_config.params


@pytest.fixture
def weights(params: FleetParams) -> CostWeights:
    return CostWeights.from_fleet(params)


@pytest.fixture
def common_weights(params: FleetParams) -> CostWeights:
    """Case-study weights with equal thermal and storage energy prices."""
    return CostWeights(c_fuel=[1.0], c_on=[0.2], c_sw=[0.3], c_st=[1.0])


@pytest.fixture
def u_star(params: FleetParams):
    return constant_setpoints(params, RATED)


@pytest.fixture
def day1_bounds() -> ForecastBounds:
    return load_bounds_csv(BUNDLED_DAY1, ts=1.0)


def make_bounds(w_r_lo, w_r_hi, w_d_lo, w_d_hi, ts: float = 0.25) -> ForecastBounds:
    return ForecastBounds(
        lower=DisturbanceTrajectory(w_r=np.atleast_2d(w_r_lo), w_d=np.atleast_2d(w_d_lo)),
        upper=DisturbanceTrajectory(w_r=np.atleast_2d(w_r_hi), w_d=np.atleast_2d(w_d_hi)),
        ts=ts,
    )


def case_study_bounds(rng: np.random.Generator, steps: int, spread: float = 0.1) -> ForecastBounds:
    """Random bounds inside the case-study fleet's operability requirements."""
    load = rng.uniform(0.2 + spread, 1.0, steps)
    w_r_hi = rng.uniform(0.0, 1.0, (steps, 2)) * np.array(RATED)
    w_r_lo = w_r_hi * rng.uniform(0.0, 1.0, (steps, 2))
    return make_bounds(w_r_lo, w_r_hi, -load[:, None], -(load - spread)[:, None])


def random_fleet(rng: np.random.Generator, n_t: int = 1, n_s: int = 1, n_r: int = 2) -> FleetParams:
    thermal = []
    for _ in range(n_t):
        p_min = rng.uniform(0.0, 0.4)
        thermal.append(ThermalUnit(
            p_min=p_min,
            p_max=p_min + rng.uniform(0.2, 1.0),
            chi=rng.uniform(0.2, 2.0),
            c_fuel=rng.uniform(0.5, 1.5),
            c_on=rng.uniform(0.0, 0.5),
            c_sw=rng.uniform(0.0, 0.5),
        ))
    storage = [
        StorageUnit(
            p_min=-rng.uniform(0.2, 1.0),
            p_max=rng.uniform(0.2, 1.0),
            chi=rng.uniform(0.2, 2.0),
            x_min=0.0,
            x_max=rng.uniform(0.5, 4.0),
            c_st=rng.uniform(0.0, 1.0),
        )
        for _ in range(n_s)
    ]
    renewable = [
        RenewableUnit(p_min=rng.uniform(0.0, 0.2), p_rated=rng.uniform(0.3, 1.2), chi=rng.uniform(0.2, 2.0))
        for _ in range(n_r)
    ]
    return FleetParams(thermal=thermal, storage=storage, renewable=renewable, ts=0.25)

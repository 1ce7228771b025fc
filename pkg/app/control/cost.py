from typing import Sequence, Tuple

import numpy as np

from app.core.exception import invalid_argument
from app.schemas.cost import CostWeights
from app.schemas.dispatch import Dispatch
from app.schemas.scenario import SimLog


def _check_dims(p_t: np.ndarray, p_s: np.ndarray, delta, delta_prev, weights: CostWeights) -> None:
    n_t, n_s = len(weights.c_fuel), len(weights.c_st)
    shapes = {"p_t": (np.shape(p_t), n_t), "delta": (np.shape(delta), n_t),
              "delta_prev": (np.shape(delta_prev), n_t), "p_s": (np.shape(p_s), n_s)}
    for name, (shape, size) in shapes.items():
        if shape != (size,):
            raise invalid_argument(msg=f"{name} has shape {shape}, weights expect ({size},)")


def stage_cost_arrays(
        p_t: np.ndarray,
        p_s: np.ndarray,
        delta: np.ndarray,
        delta_prev: np.ndarray,
        weights: CostWeights,
) -> float:
    # renewables carry no operating cost
    return float(
        weights.c_fuel @ p_t
        + weights.c_on @ delta
        + weights.c_sw @ np.abs(np.asarray(delta, dtype=float) - delta_prev)
        + weights.c_st @ p_s
    )


def stage_cost(dispatch: Dispatch, delta, delta_prev, weights: CostWeights) -> float:
    """Operating cost of one step; negative when the storage absorbs more than the thermal units cost."""
    _check_dims(dispatch.p_t, dispatch.p_s, delta, delta_prev, weights)
    return stage_cost_arrays(dispatch.p_t, dispatch.p_s, np.asarray(delta), np.asarray(delta_prev), weights)


def horizon_cost(
        trajectory: Sequence[Tuple[Dispatch, np.ndarray]],
        delta_0,
        weights: CostWeights,
) -> float:
    if not trajectory:
        raise invalid_argument(msg="horizon_cost needs at least one step")
    total, previous = 0.0, np.asarray(delta_0)
    for dispatch, delta in trajectory:
        total += stage_cost(dispatch, delta, previous, weights)
        previous = np.asarray(delta)
    return total


def stage_costs(log: SimLog, weights: CostWeights) -> np.ndarray:
    if len(log) == 0:
        return np.zeros(0)
    previous = np.vstack([log.delta_0[None, :], log.delta[:-1]]).astype(float)
    switching = np.abs(log.delta - previous)
    return (
        log.p_t @ weights.c_fuel
        + log.delta @ weights.c_on
        + switching @ weights.c_sw
        + log.p_s @ weights.c_st
    )


def closed_loop_cost(log: SimLog, weights: CostWeights) -> float:
    return float(stage_costs(log, weights).sum())

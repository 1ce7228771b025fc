import logging
from typing import List, Union

import numpy as np

from app.core.exception import invalid_argument, state_violation
from app.schemas.bands import GridState, Setpoints
from app.schemas.dispatch import StoragePowerBounds
from app.schemas.fleet import FleetParams, SetpointLimits
from app.schemas.reports import ValidationReport, Violation

logger = logging.getLogger("mg_opcon.model")

ArrayLike = Union[float, np.ndarray]


def sat(lo: ArrayLike, x: ArrayLike, hi: ArrayLike) -> ArrayLike:
    """
    Saturate `x` element-wise to [lo, hi].

    Scalars in, scalar out; any array argument broadcasts.

    Raises:
        InvalidArgument: if lo > hi in any element.
    """
    lo_arr, x_arr, hi_arr = np.asarray(lo, dtype=float), np.asarray(x, dtype=float), np.asarray(hi, dtype=float)
    if (lo_arr > hi_arr).any():
        raise invalid_argument(msg=f"saturation bounds out of order: lo={lo} > hi={hi}")

    result = np.minimum(np.maximum(x_arr, lo_arr), hi_arr)
    if result.ndim == 0:
        return float(result)
    return result


def check_state(state: GridState, params: FleetParams) -> None:
    if state.x.shape != (params.n_s,):
        raise state_violation(msg=f"state has {state.x.shape[0]} storage energies, fleet has {params.n_s} units")
    if state.delta_prev.shape != (params.n_t,):
        raise state_violation(
            msg=f"state has {state.delta_prev.shape[0]} commitments, fleet has {params.n_t} thermal units"
        )
    low = state.x < params.x_min
    high = state.x > params.x_max
    if low.any() or high.any():
        index = int(np.flatnonzero(low | high)[0])
        raise state_violation(
            msg=f"storage {index} energy {state.x[index]:.6g} outside "
                f"[{params.x_min[index]:.6g}, {params.x_max[index]:.6g}]"
        )


def check_setpoints(sp: Setpoints, params: FleetParams, limits: SetpointLimits) -> None:
    for name, values, size in (("u_t", sp.u_t, params.n_t), ("u_s", sp.u_s, params.n_s), ("u_r", sp.u_r, params.n_r)):
        if values.shape != (size,):
            raise invalid_argument(msg=f"{name} has {values.shape[0]} entries, fleet expects {size}")
        if ((values < limits.u_min) | (values > limits.u_max)).any():
            raise invalid_argument(msg=f"{name}={values.tolist()} outside [{limits.u_min}, {limits.u_max}]")
    if sp.delta_t.shape != (params.n_t,):
        raise invalid_argument(msg=f"delta_t has {sp.delta_t.shape[0]} entries, fleet expects {params.n_t}")


def storage_power_bounds(x_prev: np.ndarray, params: FleetParams) -> StoragePowerBounds:
    """
    Time-varying admissible storage power for the coming sampling interval.

    Any power inside the returned bounds keeps x_prev - Ts * p within [x_min, x_max].
    """
    x_prev = np.asarray(x_prev, dtype=float)
    if ((x_prev < params.x_min) | (x_prev > params.x_max)).any():
        raise state_violation(
            msg=f"storage energy {x_prev.tolist()} outside [{params.x_min.tolist()}, {params.x_max.tolist()}]"
        )
    p_min, p_max = _storage_bounds(x_prev, params)
    return StoragePowerBounds(p_min=p_min, p_max=p_max)


def _storage_bounds(x_prev: np.ndarray, params: FleetParams):
    p_min = np.maximum(params.storage_p_min, (x_prev - params.x_max) / params.ts)
    p_max = np.minimum(params.storage_p_max, (x_prev - params.x_min) / params.ts)
    return p_min, p_max


def validate_params(params: FleetParams) -> ValidationReport:
    violations: List[Violation] = []

    def check(condition: bool, unit: str, index, rule: str, detail: str = "") -> None:
        if not condition:
            violations.append(Violation(unit=unit, index=index, rule=rule, detail=detail))

    check(params.ts > 0, "fleet", None, "ts > 0", f"ts={params.ts}")
    check(params.n_loads >= 1, "fleet", None, "n_loads ≥ 1", f"n_loads={params.n_loads}")

    for i, unit in enumerate(params.thermal):
        check(unit.p_min <= unit.p_max, "thermal", i, "p_min ≤ p_max", f"{unit.p_min} > {unit.p_max}")
        check(unit.p_min >= 0, "thermal", i, "p_min ≥ 0", f"p_min={unit.p_min}")
        check(unit.chi >= 0, "thermal", i, "chi ≥ 0", f"chi={unit.chi}")
        for weight in ("c_fuel", "c_on", "c_sw"):
            value = getattr(unit, weight)
            check(value >= 0, "thermal", i, f"{weight} ≥ 0", f"{weight}={value}")

    for i, unit in enumerate(params.storage):
        check(unit.p_min <= unit.p_max, "storage", i, "p_min ≤ p_max", f"{unit.p_min} > {unit.p_max}")
        check(unit.p_min <= 0 <= unit.p_max, "storage", i, "p_min ≤ 0 ≤ p_max", f"[{unit.p_min}, {unit.p_max}]")
        check(unit.chi >= 0, "storage", i, "chi ≥ 0", f"chi={unit.chi}")
        check(unit.x_min >= 0, "storage", i, "x_min ≥ 0", f"x_min={unit.x_min}")
        check(unit.x_min < unit.x_max, "storage", i, "x_min < x_max", f"{unit.x_min} >= {unit.x_max}")
        check(unit.c_st >= 0, "storage", i, "c_st ≥ 0", f"c_st={unit.c_st}")

    for i, unit in enumerate(params.renewable):
        check(unit.p_min >= 0, "renewable", i, "p_min ≥ 0", f"p_min={unit.p_min}")
        check(unit.chi >= 0, "renewable", i, "chi ≥ 0", f"chi={unit.chi}")
        if unit.p_rated is not None:
            check(unit.p_rated >= 0, "renewable", i, "p_rated ≥ 0", f"p_rated={unit.p_rated}")
            check(unit.p_min <= unit.p_rated, "renewable", i, "p_min ≤ p_max", f"{unit.p_min} > {unit.p_rated}")

    if violations:
        logger.debug(f"Fleet validation found {len(violations)} violation(s)")
    return ValidationReport(violations=violations)

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from app.core.exception import configuration_error, invalid_argument
from app.schemas.bands import Setpoints
from app.schemas.fleet import FleetParams, SetpointLimits
from app.schemas.reports import (
    DroopInterval,
    OverlapReport,
    RequirementReport,
    RequirementRow,
    StorageRhoBounds,
)
from app.schemas.scenario import ForecastBounds

logger = logging.getLogger("mg_opcon.setpoint")

# droop regions along rho, from first to last engaged
PRIORITY = ("renewable", "storage", "thermal")


def storage_rho_bounds(params: FleetParams) -> StorageRhoBounds:
    if params.n_s == 0:
        raise invalid_argument(msg="storage_rho_bounds needs at least one storage unit")
    if (params.storage_chi <= 0).any():
        index = int(np.flatnonzero(params.storage_chi <= 0)[0])
        raise invalid_argument(msg=f"storage {index} has chi={params.storage_chi[index]}; the rho bounds need chi > 0")
    return StorageRhoBounds(
        rho_min_s=float(np.min(params.storage_p_min / params.storage_chi)),
        rho_max_s=float(np.max(params.storage_p_max / params.storage_chi)),
    )


def resolve_p_rated(
        params: FleetParams,
        explicit: Optional[Sequence[float]] = None,
        bounds: Optional[ForecastBounds] = None,
) -> np.ndarray:
    """
    Rated renewable power used by the constant setpoints.

    Order of precedence: explicit values, the fleet's configured `p_rated`,
    then the per-unit maximum of the forecast's upper availability.
    """
    if explicit is not None:
        rated = np.asarray(explicit, dtype=float)
        if rated.shape != (params.n_r,):
            raise configuration_error(msg=f"{rated.shape[0]} rated powers given, fleet has {params.n_r} renewables")
        return rated

    rated = params.p_rated.copy()
    missing = np.isnan(rated)
    if missing.any():
        if bounds is None or bounds.upper.n_r != params.n_r or len(bounds) == 0:
            raise configuration_error(
                msg=f"p_rated missing for renewable unit(s) {np.flatnonzero(missing).tolist()} "
                    f"and no matching forecast to derive it from"
            )
        rated[missing] = bounds.upper.w_r.max(axis=0)[missing]
    return rated


def constant_setpoints(
        params: FleetParams,
        p_rated: Sequence[float],
        limits: SetpointLimits = SetpointLimits(),
) -> Setpoints:
    """
    Constant setpoints that realize the renewables > storage > thermal priority.

    Thermal droop lines start where storage saturates at full discharge and
    renewable lines end where storage saturates at full charge; storage is
    centered at zero. All thermal units are committed.

    Raises:
        InvalidArgument: if a storage unit has chi = 0.
        ConfigurationError: if a setpoint falls outside [u_min, u_max].
    """
    p_rated = np.asarray(p_rated, dtype=float)
    if p_rated.shape != (params.n_r,):
        raise invalid_argument(msg=f"{p_rated.shape[0]} rated powers given, fleet has {params.n_r} renewables")
    if (p_rated < 0).any():
        raise invalid_argument(msg=f"p_rated must be >= 0, got {p_rated.tolist()}")

    rho = storage_rho_bounds(params)
    u_t = params.thermal_p_min - rho.rho_max_s * params.thermal_chi
    u_r = p_rated - rho.rho_min_s * params.renewable_chi
    u_s = np.zeros(params.n_s)

    for name, values in (("u_t", u_t), ("u_s", u_s), ("u_r", u_r)):
        if (values < limits.u_min).any():
            raise configuration_error(msg=f"{name}={values.tolist()} below u_min={limits.u_min}")
        if (values > limits.u_max).any():
            raise configuration_error(msg=f"{name}={values.tolist()} above u_max={limits.u_max}")

    logger.debug(f"Constant setpoints u_t={u_t.tolist()} u_s={u_s.tolist()} u_r={u_r.tolist()}")
    return Setpoints(u_t=u_t, u_s=u_s, u_r=u_r, delta_t=np.ones(params.n_t, dtype=int))


def check_requirements(params: FleetParams, bounds: ForecastBounds) -> RequirementReport:
    thermal_min = float(params.thermal_p_min.sum())
    thermal_max = float(params.thermal_p_max.sum())
    rows = []
    for profile, trajectory in (("w_min", bounds.lower), ("w_max", bounds.upper)):
        # loads are nonpositive, the requirements compare the magnitude
        for k, demand in enumerate(np.abs(trajectory.w_d.sum(axis=1))):
            rows.append(RequirementRow(
                k=k,
                profile=profile,
                demand=float(demand),
                requirement_2=bool(demand <= thermal_max),
                requirement_3=bool(thermal_min <= demand),
            ))
    passed = all(row.passed for row in rows)
    if not passed:
        logger.info(f"Operability requirements fail at {sum(not r.passed for r in rows)} step/profile pair(s)")
    return RequirementReport(thermal_min=thermal_min, thermal_max=thermal_max, rows=rows, passed=passed)


def _interval(unit: str, index: int, p_lo: float, p_hi: float, u: float, chi: float) -> Optional[DroopInterval]:
    if chi <= 0:
        return None
    return DroopInterval(unit=unit, index=index, rho_low=(p_lo - u) / chi, rho_high=(p_hi - u) / chi)


def check_nonoverlap(
        sp: Setpoints,
        params: FleetParams,
        w_r_range: Tuple[Sequence[float], Sequence[float]],
        state_range: Tuple[Sequence[float], Sequence[float]],
) -> OverlapReport:
    """
    Check that the linear droop regions of renewables, storage and thermal units
    are disjoint and ordered along rho.

    Widest instantaneous clamps over the given availability and energy ranges
    are used, so a pass holds for every state and availability in those ranges.
    """
    _, w_r_hi = (np.asarray(v, dtype=float) for v in w_r_range)
    x_lo, x_hi = (np.asarray(v, dtype=float) for v in state_range)
    s_lo = np.maximum(params.storage_p_min, (x_lo - params.x_max) / params.ts)
    s_hi = np.minimum(params.storage_p_max, (x_hi - params.x_min) / params.ts)

    intervals = []
    for i in range(params.n_t):
        intervals.append(_interval(
            "thermal", i, params.thermal_p_min[i], params.thermal_p_max[i], sp.u_t[i], params.thermal_chi[i]
        ))
    for i in range(params.n_s):
        intervals.append(_interval("storage", i, s_lo[i], s_hi[i], sp.u_s[i], params.storage_chi[i]))
    for i in range(params.n_r):
        r_lo = min(params.renewable_p_min[i], w_r_hi[i])
        intervals.append(_interval("renewable", i, r_lo, w_r_hi[i], sp.u_r[i], params.renewable_chi[i]))
    intervals = [iv for iv in intervals if iv is not None]

    hulls = {}
    for unit in PRIORITY:
        spans = [iv for iv in intervals if iv.unit == unit and iv.width > 0]
        if spans:
            hulls[unit] = (min(iv.rho_low for iv in spans), max(iv.rho_high for iv in spans))

    present = [unit for unit in PRIORITY if unit in hulls]
    overlapping = []
    for a_pos, a in enumerate(present):
        for b in present[a_pos + 1:]:
            (a_lo, a_hi), (b_lo, b_hi) = hulls[a], hulls[b]
            # shared endpoints are allowed
            if a_lo < b_hi and b_lo < a_hi:
                overlapping.append((a, b))
    ordered = all(hulls[a][1] <= hulls[b][0] for a, b in zip(present, present[1:]))

    return OverlapReport(
        intervals=intervals,
        hulls=hulls,
        overlapping_pairs=overlapping,
        non_overlapping=not overlapping,
        ordered=ordered,
        passed=not overlapping and ordered,
    )

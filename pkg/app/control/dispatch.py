"""
Steady-state power balance under saturating droop control.

Every grid-forming unit follows p = sat(lo, u + chi * rho, hi) for one common
balancing variable rho. The aggregate generation is piecewise linear and
nondecreasing in rho, so the balance is solved exactly by scanning the clamp
breakpoints and interpolating on the segment that brackets the demand.
"""
import logging
from typing import NamedTuple, Tuple

import numpy as np

from app.control.model import _storage_bounds, check_state
from app.core.config import settings
from app.core.exception import infeasible
from app.schemas.bands import DisturbanceSample, GridState, Setpoints
from app.schemas.dispatch import Dispatch, StoragePowerBounds
from app.schemas.enum import SaturationState
from app.schemas.fleet import FleetParams

logger = logging.getLogger("mg_opcon.dispatch")

# relative tolerance for detecting a plateau at exactly the demand level
_FLAT_TOL = 1e-12


class DroopLines(NamedTuple):
    lo: np.ndarray
    hi: np.ndarray
    u: np.ndarray
    chi: np.ndarray
    on: np.ndarray
    n_t: int
    n_s: int


def droop_lines(
        u_t: np.ndarray,
        u_s: np.ndarray,
        u_r: np.ndarray,
        delta: np.ndarray,
        w_r: np.ndarray,
        s_lo: np.ndarray,
        s_hi: np.ndarray,
        params: FleetParams,
) -> DroopLines:
    on = np.asarray(delta).astype(bool)
    # decommitted thermal units are pinned at zero
    t_lo = np.where(on, params.thermal_p_min, 0.0)
    t_hi = np.where(on, params.thermal_p_max, 0.0)
    t_u = np.where(on, u_t, 0.0)
    t_chi = np.where(on, params.thermal_chi, 0.0)
    r_lo = np.minimum(params.renewable_p_min, w_r)
    return DroopLines(
        lo=np.concatenate([t_lo, s_lo, r_lo]),
        hi=np.concatenate([t_hi, s_hi, w_r]),
        u=np.concatenate([t_u, u_s, u_r]),
        chi=np.concatenate([t_chi, params.storage_chi, params.renewable_chi]),
        on=on,
        n_t=params.n_t,
        n_s=params.n_s,
    )


def _raw(lines: DroopLines, rho: float) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.where(lines.chi > 0, lines.u + lines.chi * rho, lines.u)


def unit_powers(lines: DroopLines, rho: float) -> np.ndarray:
    return np.minimum(np.maximum(_raw(lines, rho), lines.lo), lines.hi)


def power_range(lines: DroopLines) -> Tuple[float, float]:
    active = lines.chi > 0
    fixed = float(np.clip(lines.u[~active], lines.lo[~active], lines.hi[~active]).sum())
    return fixed + float(lines.lo[active].sum()), fixed + float(lines.hi[active].sum())


def solve_rho_rows(
        lo: np.ndarray,
        hi: np.ndarray,
        u: np.ndarray,
        chi: np.ndarray,
        demand: np.ndarray,
        tol: float = settings.tolerance,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Balance many independent instants at once; each row of the (B, n) inputs is one instant.

    Returns (rho, feasible, low, high) per row; rho is nan where the demand
    lies outside [low, high].
    """
    lo, hi, u, chi = (np.ascontiguousarray(a, dtype=float) for a in (lo, hi, u, chi))
    demand = np.asarray(demand, dtype=float)
    active = chi > 0
    safe_chi = np.where(active, chi, 1.0)

    fixed = np.where(active, 0.0, np.minimum(np.maximum(u, lo), hi)).sum(axis=1)
    low = fixed + np.where(active, lo, 0.0).sum(axis=1)
    high = fixed + np.where(active, hi, 0.0).sum(axis=1)
    feasible = (demand >= low - tol) & (demand <= high + tol)

    # inactive units repeat the row's largest breakpoint so every row has the same width
    raw = np.concatenate([(lo - u) / safe_chi, (hi - u) / safe_chi], axis=1)
    mask = np.concatenate([active, active], axis=1)
    top = np.where(mask, raw, -np.inf).max(axis=1)
    top = np.where(np.isfinite(top), top, 0.0)
    breakpoints = np.sort(np.where(mask, raw, top[:, None]), axis=1)

    slopes = np.where(active, chi, 0.0)
    offsets = np.where(active, u, 0.0)
    clipped = np.minimum(np.maximum(offsets[:, None, :] + slopes[:, None, :] * breakpoints[:, :, None],
                                    lo[:, None, :]), hi[:, None, :])
    values = fixed[:, None] + np.where(active[:, None, :], clipped, 0.0).sum(axis=2)

    width = values.shape[1]
    rows = np.arange(len(values))
    on_level = np.abs(values - demand[:, None]) <= _FLAT_TOL * np.maximum(1.0, np.abs(demand))[:, None]
    first = np.argmax(on_level, axis=1)
    last = width - 1 - np.argmax(on_level[:, ::-1], axis=1)
    below, above = first == 0, last == width - 1
    level_rho = np.where(
        below & above, 0.0,
        np.where(below, breakpoints[rows, last],
                 np.where(above, breakpoints[rows, first],
                          0.5 * (breakpoints[rows, first] + breakpoints[rows, last]))),
    )

    i = (values < demand[:, None]).sum(axis=1)
    left, right = np.clip(i - 1, 0, width - 1), np.clip(i, 0, width - 1)
    rise = values[rows, right] - values[rows, left]
    with np.errstate(divide="ignore", invalid="ignore"):
        step_rho = breakpoints[rows, left] + (demand - values[rows, left]) * (
            (breakpoints[rows, right] - breakpoints[rows, left]) / rise
        )
    step_rho = np.where(i == 0, breakpoints[:, 0], np.where(i == width, breakpoints[:, -1], step_rho))

    rho = np.where(on_level.any(axis=1), level_rho, step_rho)
    rho = np.where(active.any(axis=1), rho, 0.0)
    return np.where(feasible, rho, np.nan), feasible, low, high


def row_powers(lo: np.ndarray, hi: np.ndarray, u: np.ndarray, chi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        raw = np.where(chi > 0, u + chi * rho[..., None], u)
    return np.minimum(np.maximum(raw, lo), hi)


def solve_rho(lines: DroopLines, demand: float, tol: float = settings.tolerance) -> float:
    rho, feasible, low, high = solve_rho_rows(
        lines.lo[None], lines.hi[None], lines.u[None], lines.chi[None], np.array([demand]), tol
    )
    if not feasible[0]:
        raise infeasible(demand=demand, low=float(low[0]), high=float(high[0]))
    return float(rho[0])


def dispatch_powers(
        u_t: np.ndarray,
        u_s: np.ndarray,
        u_r: np.ndarray,
        delta: np.ndarray,
        w_r: np.ndarray,
        w_d: np.ndarray,
        x: np.ndarray,
        params: FleetParams,
) -> Tuple[float, np.ndarray, DroopLines]:
    """Array-level balance used by the rollouts; returns (rho, unit powers, lines)."""
    s_lo, s_hi = _storage_bounds(x, params)
    lines = droop_lines(u_t, u_s, u_r, delta, w_r, s_lo, s_hi, params)
    rho = solve_rho(lines, float(-w_d.sum()))
    return rho, unit_powers(lines, rho), lines


def advance_energy(x: np.ndarray, p_s: np.ndarray, params: FleetParams) -> np.ndarray:
    # clipping only absorbs rounding; the power bounds already keep x inside its limits
    return np.clip(x - params.ts * p_s, params.x_min, params.x_max)


def _flags(lines: DroopLines, rho: float) -> Tuple[SaturationState, ...]:
    raw = _raw(lines, rho)
    flags = []
    for i in range(len(raw)):
        if i < lines.n_t and not lines.on[i]:
            flags.append(SaturationState.off)
        elif raw[i] <= lines.lo[i]:
            flags.append(SaturationState.lower)
        elif raw[i] >= lines.hi[i]:
            flags.append(SaturationState.upper)
        else:
            flags.append(SaturationState.interior)
    return tuple(flags)


def _lines_for(
        sp: Setpoints,
        w: DisturbanceSample,
        bounds: StoragePowerBounds,
        params: FleetParams,
) -> DroopLines:
    return droop_lines(sp.u_t, sp.u_s, sp.u_r, sp.delta_t, w.w_r, bounds.p_min, bounds.p_max, params)


def aggregate_power(
        rho: float,
        sp: Setpoints,
        w: DisturbanceSample,
        bounds: StoragePowerBounds,
        params: FleetParams,
) -> float:
    """Total generation of all units at balancing variable `rho`; accepts +/- inf."""
    return float(unit_powers(_lines_for(sp, w, bounds, params), rho).sum())


def feasible_range(
        sp: Setpoints,
        w: DisturbanceSample,
        state: GridState,
        params: FleetParams,
) -> Tuple[float, float]:
    s_lo, s_hi = _storage_bounds(state.x, params)
    return power_range(droop_lines(sp.u_t, sp.u_s, sp.u_r, sp.delta_t, w.w_r, s_lo, s_hi, params))


def solve_balance(
        sp: Setpoints,
        w: DisturbanceSample,
        state: GridState,
        params: FleetParams,
) -> Dispatch:
    """
    Find the balancing variable and the realized unit powers for one sampling instant.

    Raises:
        StateViolation: if the storage energies lie outside their limits.
        Infeasible: if the demand lies outside the aggregate saturation range.
    """
    check_state(state, params)
    rho, powers, lines = dispatch_powers(sp.u_t, sp.u_s, sp.u_r, sp.delta_t, w.w_r, w.w_d, state.x, params)
    n_t, n_s = params.n_t, params.n_s
    return Dispatch(
        p_t=powers[:n_t],
        p_s=powers[n_t:n_t + n_s],
        p_r=powers[n_t + n_s:],
        rho=rho,
        saturated=_flags(lines, rho),
        residual=float(powers.sum() + w.w_d.sum()),
    )


def step(
        state: GridState,
        sp: Setpoints,
        w: DisturbanceSample,
        params: FleetParams,
) -> Tuple[Dispatch, GridState]:
    dispatch = solve_balance(sp, w, state, params)
    following = GridState(x=advance_energy(state.x, dispatch.p_s, params), delta_prev=sp.delta_t)
    return dispatch, following

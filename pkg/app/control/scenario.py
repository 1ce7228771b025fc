import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.exception import invalid_argument, parse_error
from app.schemas.enum import RenewableKind
from app.schemas.fleet import FleetParams
from app.schemas.scenario import DisturbanceTrajectory, ForecastBounds

logger = logging.getLogger("mg_opcon.scenario")

_COLUMN = re.compile(r"^(wr|wd)_(min|max)_(\d+)$")

# default capacities of the case study's wind turbine and PV plant [pu]
_DEFAULT_CAPACITY = {RenewableKind.wind: 1.2, RenewableKind.pv: 0.55}
_PV_WINDOW = (6.0, 20.0)


def interpolate(bounds: ForecastBounds, alpha: float) -> DisturbanceTrajectory:
    """Trajectory between the worst case (alpha=0) and the best case (alpha=1)."""
    if not 0.0 <= alpha <= 1.0:
        raise invalid_argument(msg=f"alpha must lie in [0, 1], got {alpha}")
    lower, upper = bounds.lower, bounds.upper
    return DisturbanceTrajectory(
        w_r=lower.w_r + alpha * (upper.w_r - lower.w_r),
        w_d=lower.w_d + alpha * (upper.w_d - lower.w_d),
    )


def alpha_grid(size: int = 11) -> np.ndarray:
    if size < 2:
        raise invalid_argument(msg=f"an alpha grid needs at least 2 points, got {size}")
    return np.round(np.linspace(0.0, 1.0, size), 12)


def extreme_set(bounds: ForecastBounds) -> Dict[str, DisturbanceTrajectory]:
    if bounds.is_degenerate:
        return {"w_min": bounds.lower}
    return {"w_min": bounds.lower, "w_max": bounds.upper}


def scenario_label(alpha: float) -> str:
    return f"alpha={alpha:.2f}"


def _columns(frame: pd.DataFrame, kind: str, bound: str) -> List[str]:
    found = sorted(
        (int(m.group(3)), name)
        for name in frame.columns
        if (m := _COLUMN.match(name)) and m.group(1) == kind and m.group(2) == bound
    )
    indices = [i for i, _ in found]
    if indices != list(range(1, len(indices) + 1)):
        raise parse_error(msg=f"{kind}_{bound}_* columns must be numbered 1..n, got {indices}")
    return [name for _, name in found]


def _resample(values: np.ndarray, source_step: float, ts: float) -> np.ndarray:
    source = np.arange(values.shape[0]) * source_step
    target = np.arange(0.0, source[-1] + 1e-9, ts)
    return np.column_stack([np.interp(target, source, values[:, j]) for j in range(values.shape[1])]) \
        if values.shape[1] else np.zeros((len(target), 0))


def load_bounds_csv(
        path: Union[str, Path],
        ts: float = settings.ts_hours,
        source_step_hours: Optional[float] = None,
) -> ForecastBounds:
    """
    Parse interval bounds from CSV.

    Columns: `k, wr_min_1..n_r, wr_max_1..n_r, wd_min_1..n_d, wd_max_1..n_d`.
    When `source_step_hours` differs from `ts`, every column is linearly
    resampled onto the `ts` grid.

    Raises:
        ParseError: on a missing column, a non-numeric cell, k values that do
            not count up by one, a sign violation or w_min > w_max, naming the
            offending file line.
    """
    try:
        frame = pd.read_csv(path, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise parse_error(msg=f"cannot read bounds file {path}: {e}") from e

    frame.columns = [str(c).strip() for c in frame.columns]
    if "k" not in frame.columns:
        raise parse_error(msg="bounds file has no 'k' column")
    if frame.empty:
        raise parse_error(msg="bounds file has no rows")

    groups = {(kind, bound): _columns(frame, kind, bound) for kind in ("wr", "wd") for bound in ("min", "max")}
    for kind in ("wr", "wd"):
        if len(groups[(kind, "min")]) != len(groups[(kind, "max")]):
            raise parse_error(msg=f"{kind}_min_* and {kind}_max_* column counts differ")
    if not groups[("wd", "min")]:
        raise parse_error(msg="bounds file has no load columns")

    used = ["k"] + [name for names in groups.values() for name in names]
    numeric = frame[used].apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1)
    if bad.any():
        # header is file line 1
        raise parse_error(msg="non-numeric or missing value", row=int(np.flatnonzero(bad.to_numpy())[0]) + 2)

    k = numeric["k"].to_numpy(dtype=float)
    gaps = np.flatnonzero(k != k[0] + np.arange(len(k)))
    if len(gaps):
        raise parse_error(msg=f"k must count up by one from {k[0]:g}, got {k[gaps[0]]:g}", row=int(gaps[0]) + 2)

    arrays = {key: numeric[names].to_numpy(dtype=float) for key, names in groups.items()}
    checks = (
        ((arrays[("wr", "min")] < 0).any(axis=1) | (arrays[("wr", "max")] < 0).any(axis=1), "w_r must be >= 0"),
        ((arrays[("wd", "min")] > 0).any(axis=1) | (arrays[("wd", "max")] > 0).any(axis=1), "w_d must be <= 0"),
        ((arrays[("wr", "min")] > arrays[("wr", "max")]).any(axis=1)
         | (arrays[("wd", "min")] > arrays[("wd", "max")]).any(axis=1), "w_min exceeds w_max"),
    )
    for mask, message in checks:
        if mask.any():
            raise parse_error(msg=message, row=int(np.flatnonzero(mask)[0]) + 2)

    if source_step_hours is not None and not np.isclose(source_step_hours, ts):
        arrays = {key: _resample(values, source_step_hours, ts) for key, values in arrays.items()}
        logger.info(f"Resampled {len(frame)} rows at {source_step_hours} h onto a {ts} h grid")

    return ForecastBounds(
        lower=DisturbanceTrajectory(w_r=arrays[("wr", "min")], w_d=arrays[("wd", "min")]),
        upper=DisturbanceTrajectory(w_r=arrays[("wr", "max")], w_d=arrays[("wd", "max")]),
        ts=ts,
    )


def _smooth_noise(rng: np.random.Generator, size: int, persistence: float, scale: float) -> np.ndarray:
    shocks = rng.normal(0.0, scale, size)
    values = np.empty(size)
    level = 0.0
    for i, shock in enumerate(shocks):
        level = persistence * level + shock
        values[i] = level
    return values


def synth_profiles(
        seed: int,
        days: int,
        params: FleetParams,
        ts: Optional[float] = None,
) -> ForecastBounds:
    """
    Reproducible diurnal wind, PV and load bounds for desk-scale studies.

    Loads stay inside the thermal fleet's [sum p_min, sum p_max] for both
    bound profiles, PV is zero from 20:00 to 06:00.
    """
    if days < 1:
        raise invalid_argument(msg=f"days must be >= 1, got {days}")
    ts = params.ts if ts is None else ts
    thermal_min, thermal_max = float(params.thermal_p_min.sum()), float(params.thermal_p_max.sum())
    if thermal_max <= thermal_min:
        raise invalid_argument(msg="synthetic loads need a thermal fleet with sum p_max > sum p_min")

    rng = np.random.default_rng(seed)
    steps = int(round(days * 24.0 / ts))
    hours = (np.arange(steps) * ts) % 24.0
    span = thermal_max - thermal_min

    # load magnitude: morning and evening peaks plus persistent noise
    half_band = 0.09 * span
    shape = 0.5 + 0.15 * np.sin(2 * np.pi * (hours - 9.0) / 24.0) + 0.1 * np.sin(4 * np.pi * (hours - 5.0) / 24.0)
    center = thermal_min + span * (shape + _smooth_noise(rng, steps, 0.9, 0.02))
    margin = 0.01 * span
    center = np.clip(center, thermal_min + half_band + margin, thermal_max - half_band - margin)
    share = 1.0 / params.n_loads
    wd_min = np.repeat((-(center + half_band) * share)[:, None], params.n_loads, axis=1)
    wd_max = np.repeat((-(center - half_band) * share)[:, None], params.n_loads, axis=1)

    wr_min = np.zeros((steps, params.n_r))
    wr_max = np.zeros((steps, params.n_r))
    for i, unit in enumerate(params.renewable):
        capacity = unit.p_rated if unit.p_rated is not None else _DEFAULT_CAPACITY[unit.kind]
        if unit.kind is RenewableKind.pv:
            start, end = _PV_WINDOW
            daylight = (hours >= start) & (hours < end)
            clear = np.where(daylight, np.sin(np.pi * (hours - start) / (end - start)), 0.0)
            cloud = np.repeat(rng.uniform(0.4, 1.0, days + 1), int(round(24.0 / ts)))[:steps]
            best = capacity * clear * np.minimum(1.0, cloud + 0.25)
            worst = capacity * clear * cloud * 0.6
        else:
            level = np.clip(0.45 + _smooth_noise(rng, steps, 0.97, 0.05), 0.0, 1.0)
            best = capacity * np.clip(level + 0.15, 0.0, 1.0)
            worst = capacity * np.clip(level - 0.15, 0.0, 1.0)
        wr_min[:, i] = np.minimum(worst, best)
        wr_max[:, i] = best

    logger.info(f"Generated {steps} synthetic steps ({days} day(s), seed {seed})")
    return ForecastBounds(
        lower=DisturbanceTrajectory(w_r=wr_min, w_d=wd_min),
        upper=DisturbanceTrajectory(w_r=wr_max, w_d=wd_max),
        ts=ts,
    )

from pathlib import Path
from typing import Optional, Tuple

import click

from app.control.scenario import synth_profiles
from app.control.setpoint import constant_setpoints, resolve_p_rated
from app.core.config import settings
from app.core.exception import invalid_argument
from app.repository.fleet import FleetRepository
from app.repository.forecast import ForecastRepository
from app.schemas.bands import Setpoints
from app.schemas.ems import EmsOptions
from app.schemas.enum import ScenarioPolicy, Solver
from app.schemas.fleet import FleetConfig, FleetParams
from app.schemas.scenario import ForecastBounds

BUNDLED_DAY1 = Path(__file__).resolve().parent.parent / "data" / "day1_load.csv"


def get_fleet(ctx: click.Context, param: click.Parameter, value: str) -> FleetConfig:
    return FleetRepository(value).load()


def get_floats(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> Optional[Tuple[float, ...]]:
    if value is None:
        return None
    try:
        return tuple(float(v) for v in value.split(",") if v.strip())
    except ValueError as e:
        raise invalid_argument(msg=f"--{param.name} expects comma-separated numbers, got {value!r}") from e


def get_bounds(
        params: FleetParams,
        bounds: Optional[str],
        seed: Optional[int],
        days: Optional[int],
        source_step_hours: Optional[float] = None,
) -> ForecastBounds:
    """Bounds from a CSV file, or synthetic ones when no file is given."""
    if bounds is not None:
        if seed is not None and days is not None:
            raise invalid_argument(msg="give either --bounds or --seed/--days, not both")
        return ForecastRepository(bounds).load(ts=params.ts, source_step_hours=source_step_hours)
    if seed is None or days is None:
        raise invalid_argument(msg="give --bounds, or --seed and --days for synthetic profiles")
    return synth_profiles(seed=seed, days=days, params=params)


def emit(text: str, out: Optional[str]) -> None:
    if out is None:
        click.echo(text, nl=not text.endswith("\n"))
    else:
        Path(out).write_text(text)


def get_setpoints(fleet: FleetConfig, bounds: ForecastBounds, rated: Optional[Tuple[float, ...]]) -> Setpoints:
    with_renewables = bounds.upper.n_r == fleet.params.n_r
    p_rated = resolve_p_rated(fleet.params, explicit=rated, bounds=bounds if with_renewables else None)
    return constant_setpoints(fleet.params, p_rated, fleet.limits)


def run_options(command):
    """Options shared by the closed-loop commands."""
    options = (
        click.option("--fleet", "fleet", required=True, callback=get_fleet, help="Fleet configuration (JSON)."),
        click.option("--bounds", default=None, type=click.Path(exists=True, dir_okay=False), help="Bounds CSV."),
        click.option("--seed", type=int, default=None, help="Seed for synthetic bounds."),
        click.option("--days", type=click.IntRange(min=1), default=None, help="Days of synthetic bounds."),
        click.option("--source-step-hours", type=float, default=None,
                     help="Sampling step of the bounds file, if not Ts."),
        click.option("--np", "np_steps", type=click.IntRange(min=1), default=settings.prediction_horizon,
                     show_default=True, help="Prediction horizon in steps."),
        click.option("--nsim", type=click.IntRange(min=1), default=None,
                     help="Closed-loop steps [default: up to a week the bounds can cover]."),
        click.option("--solver", type=click.Choice([s.value for s in Solver]), default=Solver.branch_and_bound.value,
                     show_default=True),
        click.option("--policy", type=click.Choice([p.value for p in ScenarioPolicy]),
                     default=ScenarioPolicy.extremes.value, show_default=True, help="Scenario set of the robust EMS."),
        click.option("--max-switches", type=click.IntRange(min=0), default=settings.max_switches, show_default=True),
        click.option("--max-nodes", type=click.IntRange(min=1), default=settings.max_nodes, show_default=True),
        click.option("--rated", default=None, callback=get_floats, help="Rated renewable powers, e.g. 1.2,0.55."),
    )
    for option in reversed(options):
        command = option(command)
    return command


def ems_options(np_steps: int, solver: str, policy: str, max_switches: int, max_nodes: int) -> EmsOptions:
    return EmsOptions(
        np_steps=np_steps,
        solver=Solver(solver),
        scenario_policy=ScenarioPolicy(policy),
        max_switches=max_switches,
        max_nodes=max_nodes,
    )

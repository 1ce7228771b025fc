import json
from typing import Optional, Tuple

import click
import numpy as np

from app.cli.dependencies import BUNDLED_DAY1, emit, get_fleet, get_floats
from app.control.model import validate_params
from app.control.setpoint import check_nonoverlap, check_requirements, constant_setpoints, resolve_p_rated
from app.repository.forecast import ForecastRepository
from app.schemas.fleet import FleetConfig


@click.command(name="setpoints")
@click.option("--fleet", "fleet", required=True, callback=get_fleet, help="Fleet configuration (JSON).")
@click.option("--rated", default=None, callback=get_floats, help="Rated renewable powers, e.g. 1.2,0.55.")
@click.option("--out", default=None, help="Write the setpoints here instead of stdout.")
def setpoints(fleet: FleetConfig, rated: Optional[Tuple[float, ...]], out: Optional[str]) -> None:
    """Print the constant setpoints that realize renewables > storage > thermal."""
    p_rated = resolve_p_rated(fleet.params, explicit=rated)
    sp = constant_setpoints(fleet.params, p_rated, fleet.limits)
    emit(sp.model_dump_json(indent=2) + "\n", out)


@click.command(name="check")
@click.option("--fleet", "fleet", required=True, callback=get_fleet, help="Fleet configuration (JSON).")
@click.option("--forecast", default=str(BUNDLED_DAY1), show_default="bundled day-1 load bounds",
              type=click.Path(exists=True, dir_okay=False), help="Bounds CSV.")
@click.option("--rated", default=None, callback=get_floats, help="Rated renewable powers, e.g. 1.2,0.55.")
@click.option("--out", default=None, help="Write the report here instead of stdout.")
def check(fleet: FleetConfig, forecast: str, rated: Optional[Tuple[float, ...]], out: Optional[str]) -> None:
    """
    Report the operability requirements and the droop-region ordering.

    Exits with status 1 when any check fails.
    """
    params = fleet.params
    bounds = ForecastRepository(forecast).load(ts=params.ts)
    requirements = check_requirements(params, bounds)

    with_renewables = bounds.upper.n_r == params.n_r and params.n_r > 0
    p_rated = resolve_p_rated(params, explicit=rated, bounds=bounds if with_renewables else None)
    sp = constant_setpoints(params, p_rated, fleet.limits)
    if with_renewables:
        w_r_range = (bounds.lower.w_r.min(axis=0), bounds.upper.w_r.max(axis=0))
    else:
        w_r_range = (np.zeros(params.n_r), p_rated)
    overlap = check_nonoverlap(sp, params, w_r_range, (params.x_min, params.x_max))

    validation = validate_params(params)
    passed = validation.ok and requirements.passed and overlap.passed
    report = {
        "passed": passed,
        "validation": validation.model_dump(mode="json"),
        "requirements": {
            **requirements.model_dump(mode="json", exclude={"rows"}),
            "failed_steps": requirements.failed_steps,
        },
        "overlap": overlap.model_dump(mode="json"),
    }
    emit(json.dumps(report, indent=2) + "\n", out)
    if not passed:
        click.get_current_context().exit(1)

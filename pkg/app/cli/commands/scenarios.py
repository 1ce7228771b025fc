import io
from typing import Optional

import click

from app.cli.dependencies import emit, get_bounds, get_fleet
from app.control.scenario import interpolate
from app.repository.forecast import ForecastRepository
from app.schemas.fleet import FleetConfig


@click.command(name="scenarios")
@click.option("--fleet", "fleet", required=True, callback=get_fleet, help="Fleet configuration (JSON).")
@click.option("--bounds", default=None, type=click.Path(exists=True, dir_okay=False), help="Bounds CSV.")
@click.option("--seed", type=int, default=None, help="Seed for synthetic bounds.")
@click.option("--days", type=click.IntRange(min=1), default=None, help="Days of synthetic bounds.")
@click.option("--source-step-hours", type=float, default=None, help="Sampling step of the bounds file, if not Ts.")
@click.option("--alpha", type=click.FloatRange(0.0, 1.0), default=None,
              help="Emit the trajectory w_min + alpha (w_max - w_min).")
@click.option("--bounds-out", default=None, help="Also write the bounds themselves as CSV.")
@click.option("--out", default=None, help="Write the CSV here instead of stdout.")
def scenarios(
        fleet: FleetConfig,
        bounds: Optional[str],
        seed: Optional[int],
        days: Optional[int],
        source_step_hours: Optional[float],
        alpha: Optional[float],
        bounds_out: Optional[str],
        out: Optional[str],
) -> None:
    """Emit an interpolated scenario trajectory, or the bounds when no alpha is given."""
    forecast = get_bounds(fleet.params, bounds, seed, days, source_step_hours)
    repository = ForecastRepository()
    if bounds_out is not None:
        repository.write_bounds(forecast, bounds_out)

    buffer = io.StringIO()
    if alpha is None:
        repository.write_bounds(forecast, buffer)
    else:
        repository.write_trajectory(interpolate(forecast, alpha), buffer)
    emit(buffer.getvalue(), out)

import io
from typing import Optional, Tuple

import click

from app.cli.dependencies import emit, ems_options, get_bounds, get_setpoints, run_options
from app.control.ems import receding_horizon_run
from app.control.scenario import interpolate
from app.repository.simlog import SimLogRepository
from app.schemas.bands import Setpoints
from app.schemas.cost import CostWeights
from app.schemas.enum import Controller
from app.schemas.fleet import FleetConfig
from app.schemas.run import RunConfig
from app.schemas.scenario import ForecastBounds, SimLog


def run_closed_loop(
        controller: Controller,
        alpha: float,
        fleet: FleetConfig,
        bounds: ForecastBounds,
        config: RunConfig,
        u_star: Setpoints,
) -> SimLog:
    """Closed loop on the scenario `alpha` of `bounds`, the robust EMS seeing the full bounds."""
    params = fleet.params
    return receding_horizon_run(
        controller=controller,
        bounds=bounds,
        realization=interpolate(bounds, alpha),
        state0=fleet.state0,
        params=params,
        weights=CostWeights.from_fleet(params),
        opts=config.options,
        nsim=config.steps(len(bounds)),
        u_star=u_star,
    )


@click.command(name="simulate")
@run_options
@click.option("--controller", type=click.Choice([c.value for c in Controller]), default=Controller.uc_ems.value,
              show_default=True)
@click.option("--alpha", type=float, default=0.0, show_default=True, help="Realized scenario between the bounds.")
@click.option("--out", default=None, help="Write the log CSV here instead of stdout.")
def simulate(
        fleet: FleetConfig,
        bounds: Optional[str],
        seed: Optional[int],
        days: Optional[int],
        source_step_hours: Optional[float],
        np_steps: int,
        nsim: Optional[int],
        solver: str,
        policy: str,
        max_switches: int,
        max_nodes: int,
        rated: Optional[Tuple[float, ...]],
        controller: str,
        alpha: float,
        out: Optional[str],
) -> None:
    """Run one controller in closed loop and write the per-step log."""
    config = RunConfig(
        controllers=(Controller(controller),),
        alphas=(alpha,),
        nsim=nsim,
        rated=rated,
        options=ems_options(np_steps, solver, policy, max_switches, max_nodes),
    )
    forecast = get_bounds(fleet.params, bounds, seed, days, source_step_hours)
    u_star = get_setpoints(fleet, forecast, config.rated)

    log = run_closed_loop(config.controllers[0], alpha, fleet, forecast, config, u_star)
    buffer = io.StringIO()
    SimLogRepository().write(log, buffer)
    emit(buffer.getvalue(), out)
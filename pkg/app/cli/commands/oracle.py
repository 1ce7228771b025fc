import logging
from typing import Optional, Tuple

import click
import numpy as np

from app.cli.dependencies import emit, get_bounds, get_fleet, get_floats, get_setpoints
from app.control.ems import regret, setpoint_grid, solve_unit_commitment
from app.control.scenario import alpha_grid, interpolate, scenario_label
from app.core.config import settings
from app.core.exception import NoFeasiblePlan
from app.schemas.bands import GridState
from app.schemas.cost import CostWeights
from app.schemas.ems import EmsOptions, OracleReport
from app.schemas.enum import Solver
from app.schemas.fleet import FleetConfig

logger = logging.getLogger("mg_opcon.cli")

REGRET_TOLERANCE = 1e-6


@click.command(name="oracle")
@click.option("--fleet", "fleet", required=True, callback=get_fleet, help="Fleet configuration (JSON).")
@click.option("--bounds", default=None, type=click.Path(exists=True, dir_okay=False), help="Bounds CSV.")
@click.option("--seed", type=int, default=settings.seed, show_default=True,
              help="Seed for synthetic bounds and random instances.")
@click.option("--days", type=click.IntRange(min=1), default=1, show_default=True, help="Days of synthetic bounds.")
@click.option("--np", "np_steps", type=click.IntRange(1, 3), default=2, show_default=True)
@click.option("--instances", type=click.IntRange(min=0), default=20, show_default=True,
              help="Random commitment problems solved by both solvers.")
@click.option("--grid-spacing", type=click.FloatRange(min=0, min_open=True), default=0.25, show_default=True)
@click.option("--grid-radius", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--scenarios", "n_scenarios", type=click.IntRange(min=2), default=11, show_default=True)
@click.option("--rated", default=None, callback=get_floats, help="Rated renewable powers, e.g. 1.2,0.55.")
@click.option("--out", default=None, help="Write the report here instead of stdout.")
def oracle(
        fleet: FleetConfig,
        bounds: Optional[str],
        seed: int,
        days: int,
        np_steps: int,
        instances: int,
        grid_spacing: float,
        grid_radius: int,
        n_scenarios: int,
        rated: Optional[Tuple[float, ...]],
        out: Optional[str],
) -> None:
    """
    Cross-check the solvers by enumeration.

    Branch-and-bound must match exhaustive search on random instances, and
    the constant setpoints with every unit on must have zero regret over the
    alpha scenarios against a grid of setpoint trajectories. Exits with
    status 1 when either check fails.
    """
    params = fleet.params
    weights = CostWeights.from_fleet(params)
    forecast = get_bounds(params, bounds, None if bounds else seed, None if bounds else days)
    u_star = get_setpoints(fleet, forecast, rated)

    search = EmsOptions(np_steps=np_steps, max_switches=params.n_t * np_steps, max_nodes=None)
    enumeration = search.model_copy(update={"solver": Solver.exhaustive})
    rng = np.random.default_rng(seed)
    mismatches, infeasible_count, max_gap = 0, 0, 0.0
    for i in range(instances):
        start = int(rng.integers(0, len(forecast) - np_steps + 1))
        state = GridState(x=rng.uniform(params.x_min, params.x_max), delta_prev=rng.integers(0, 2, params.n_t))
        window = forecast.window(start, np_steps)
        outcomes = []
        for opts in (search, enumeration):
            try:
                outcomes.append(solve_unit_commitment(state, window, u_star, params, weights, opts).worst_case_cost)
            except NoFeasiblePlan:
                outcomes.append(None)
        if outcomes[0] is None and outcomes[1] is None:
            infeasible_count += 1
            continue
        if None in outcomes:
            mismatches += 1
            logger.error(f"Instance {i}: only one solver found a plan ({outcomes})")
            continue
        gap = abs(outcomes[0] - outcomes[1])
        max_gap = max(max_gap, gap)
        if gap > settings.tolerance:
            mismatches += 1
            logger.error(f"Instance {i}: branch-and-bound {outcomes[0]:.12g} vs exhaustive {outcomes[1]:.12g}")

    window = forecast.window(0, np_steps)
    scenarios = {scenario_label(a): interpolate(window, a) for a in alpha_grid(n_scenarios)}
    candidate = (u_star, np.ones((params.n_t, np_steps), dtype=np.int8))
    grid = setpoint_grid(u_star, grid_spacing, grid_radius)
    regret_report = regret(candidate, scenarios, fleet.state0, params, weights, grid, free_commitment=False)

    report = OracleReport(
        instances=instances,
        mismatches=mismatches,
        max_cost_gap=max_gap,
        infeasible_instances=infeasible_count,
        regret=regret_report,
        tolerance=REGRET_TOLERANCE,
    )
    emit(report.model_dump_json(indent=2) + "\n", out)
    if not report.passed:
        click.get_current_context().exit(1)

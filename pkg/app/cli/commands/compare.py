import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Tuple

import click
import pandas as pd

from app.cli.commands.simulate import run_closed_loop
from app.cli.dependencies import emit, ems_options, get_bounds, get_setpoints, run_options
from app.control.scenario import alpha_grid
from app.core.config import settings
from app.core.exception import OperationError, invalid_argument
from app.schemas.bands import Setpoints
from app.schemas.enum import Controller
from app.schemas.ems import SweepCell
from app.schemas.fleet import FleetConfig
from app.schemas.run import RunConfig
from app.schemas.scenario import ForecastBounds

logger = logging.getLogger("mg_opcon.cli")

Cell = Tuple[int, float, Controller, FleetConfig, ForecastBounds, RunConfig, Setpoints]


def run_cell(cell: Cell) -> SweepCell:
    s, alpha, controller, fleet, forecast, config, u_star = cell
    start = time.perf_counter()
    try:
        total, status = run_closed_loop(controller, alpha, fleet, forecast, config, u_star).total_cost, "ok"
    except OperationError as e:
        logger.error(f"Cell s={s} {controller.value} failed: {e.detail}")
        total, status = None, "failed"
    runtime = (time.perf_counter() - start) * 1000.0 if config.timing else 0.0
    logger.info(f"Cell s={s} {controller.value}: {status}")
    return SweepCell(s=s, alpha=alpha, controller=controller.value, total_cost=total, runtime_ms=runtime, status=status)


def _controllers(value: str) -> Tuple[Controller, ...]:
    known = {c.value: c for c in Controller}
    names = [c.strip() for c in value.split(",") if c.strip()]
    unknown = [n for n in names if n not in known]
    if unknown or not names:
        raise invalid_argument(msg=f"unknown controller(s) {unknown}; choose from {sorted(known)}")
    return tuple(known[n] for n in names)


def sweep(cells: List[Cell], workers: int) -> List[SweepCell]:
    if workers <= 1 or len(cells) <= 1:
        return [run_cell(cell) for cell in cells]
    with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as pool:
        return list(pool.map(run_cell, cells))


@click.command(name="compare")
@run_options
@click.option("--controllers", default=",".join(c.value for c in Controller), show_default=True,
              help="Comma-separated controllers to compare.")
@click.option("--scenarios", "n_scenarios", type=click.IntRange(min=2), default=11, show_default=True,
              help="Scenarios s = 0..n-1 at alpha = s / (n - 1).")
@click.option("--no-timing", is_flag=True, help="Write runtime_ms = 0 so reruns are byte-identical.")
@click.option("--out", default=None, help="Write the CSV here instead of stdout.")
def compare(
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
        controllers: str,
        n_scenarios: int,
        no_timing: bool,
        out: Optional[str],
) -> None:
    """
    Closed-loop cost of every controller on every scenario.

    Emits `s, alpha, controller, total_cost, runtime_ms, status`; a failed
    cell keeps an empty cost and does not stop the sweep.
    """
    config = RunConfig(
        controllers=_controllers(controllers),
        alphas=tuple(float(a) for a in alpha_grid(n_scenarios)),
        nsim=nsim,
        rated=rated,
        options=ems_options(np_steps, solver, policy, max_switches, max_nodes),
        timing=not no_timing,
    )
    forecast = get_bounds(fleet.params, bounds, seed, days, source_step_hours)
    u_star = get_setpoints(fleet, forecast, config.rated)

    cells = [
        (s, alpha, controller, fleet, forecast, config, u_star)
        for s, alpha in enumerate(config.alphas)
        for controller in config.controllers
    ]
    logger.info(f"Sweeping {len(cells)} cells on up to {settings.threads} worker(s)")
    rows = sweep(cells, settings.threads)

    buffer = io.StringIO()
    pd.DataFrame([row.model_dump() for row in rows], columns=list(SweepCell.model_fields)).to_csv(buffer, index=False)
    emit(buffer.getvalue(), out)

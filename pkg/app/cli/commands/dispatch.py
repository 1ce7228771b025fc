import json
from pathlib import Path

import click

from app.cli.dependencies import emit, get_fleet
from app.control.dispatch import solve_balance
from app.control.model import check_setpoints
from app.core.exception import configuration_error
from app.schemas.dispatch import DispatchRequest
from app.schemas.fleet import FleetConfig


@click.command(name="dispatch")
@click.option("--fleet", "fleet", required=True, callback=get_fleet, help="Fleet configuration (JSON).")
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False),
              help="JSON record with setpoints, disturbance and state.")
@click.option("--out", default=None, help="Write the dispatch record here instead of stdout.")
def dispatch(fleet: FleetConfig, input_path: str, out: str) -> None:
    """
    Solve the power balance for one sampling instant.

    Prints the balancing variable, the unit powers, their saturation flags
    and the balance residual as JSON.
    """
    try:
        payload = json.loads(Path(input_path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise configuration_error(msg=f"cannot read dispatch input {input_path}: {e}") from e

    request = DispatchRequest.model_validate(payload)
    check_setpoints(request.setpoints, fleet.params, fleet.limits)
    result = solve_balance(request.setpoints, request.disturbance, request.state, fleet.params)
    emit(result.model_dump_json(indent=2) + "\n", out)

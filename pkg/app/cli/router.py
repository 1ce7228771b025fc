import click

from app.cli.commands.compare import compare
from app.cli.commands.dispatch import dispatch
from app.cli.commands.oracle import oracle
from app.cli.commands.scenarios import scenarios
from app.cli.commands.setpoints import check, setpoints
from app.cli.commands.simulate import simulate

COMMANDS = (dispatch, setpoints, check, scenarios, simulate, compare, oracle)


def register(group: click.Group) -> None:
    for command in COMMANDS:
        group.add_command(command)

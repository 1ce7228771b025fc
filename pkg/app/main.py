import logging

import click
from pydantic import ValidationError

from app.cli.router import register
from app.core.config import settings
from app.core.exception import EXIT_VALIDATION, OperationError

logger = logging.getLogger("mg_opcon")


class OperationGroup(click.Group):
    """Maps domain failures to exit codes: 1 for bad input, 2 for infeasibility."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except OperationError as e:
            logger.debug(f"{type(e).__name__}: {e.detail}")
            click.echo(f"Error: {e.detail}", err=True)
            ctx.exit(e.exit_code)
        except ValidationError as e:
            click.echo(f"Error: {e}", err=True)
            ctx.exit(EXIT_VALIDATION)
        except click.UsageError as e:
            e.exit_code = EXIT_VALIDATION
            raise


@click.group(cls=OperationGroup, help=settings.description)
@click.version_option(settings.version, prog_name=settings.title)
@click.option("--verbose", "-v", is_flag=True, help="Log solver progress to stderr.")
def cli(verbose: bool) -> None:
    logging.basicConfig(level="DEBUG" if verbose else settings.log_level, format="%(levelname)s %(name)s: %(message)s", force=True)


register(cli)


if __name__ == "__main__":
    cli()

import click
from pydantic import ValidationError

from lie_entropy_lab.commands import (
    entropy_command,
    select_command,
    separation_command,
    trace_command,
    verify_command,
    walk_command,
)
from lie_entropy_lab.config import ARTIFACT_VERSION
from lie_entropy_lab.errors import ConfigError, LabError
from lie_entropy_lab.logger import logger, set_verbosity


class LabCommandGroup(click.Group):
    """Turns domain errors into the documented exit codes."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except LabError as exception:
            logger.error(f"{type(exception).__name__}: {exception}")
            ctx.exit(exception.EXIT_CODE)
        except ValidationError as exception:
            first = exception.errors()[0]
            location = ".".join(str(part) for part in first["loc"])
            logger.error(f"{ConfigError.ERROR_MESSAGE}: {location}: {first['msg']}")
            ctx.exit(ConfigError.EXIT_CODE)


@click.group(cls=LabCommandGroup)
@click.version_option(ARTIFACT_VERSION)
@click.option("--verbose", is_flag=True, help="Log debug messages.")
def main(verbose: bool):
    """Entropy and trace experiments for random walks on Lie groups."""
    set_verbosity(verbose)


main.add_command(verify_command.command)
main.add_command(entropy_command.command)
main.add_command(trace_command.command)
main.add_command(select_command.command)
main.add_command(separation_command.command)
main.add_command(walk_command.command)

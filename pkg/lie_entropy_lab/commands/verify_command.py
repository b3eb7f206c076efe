import click

from lie_entropy_lab.commands.runner import CommandRun, run_options
from lie_entropy_lab.errors import CheckFailedError
from lie_entropy_lab.logger import logger
from lie_entropy_lab.verification import SUITES, run_suites


@click.command("verify")
@run_options
@click.option(
    "--suite",
    "suites",
    multiple=True,
    type=click.Choice(list(SUITES)),
    help="Run only these suites (repeatable).",
)
def command(config_path, out, seed, threads, suites):
    """Run the property suites and write verify.json."""
    run = CommandRun("verify", config_path, out, seed, threads)
    report = run_suites(run.config, run.rng, run.threads, list(suites) or None)
    run.write_json("verify.json", report.to_record())
    run.finish()

    failures = report.failures
    logger.info(f"{len(report.checks) - len(failures)}/{len(report.checks)} checks passed")
    if failures:
        raise CheckFailedError(", ".join(check.name for check in failures))

import click

from lie_entropy_lab.commands.runner import CommandRun, run_options
from lie_entropy_lab.experiment import build_measure
from lie_entropy_lab.measures import separation_profile

SEPARATION_COLUMNS = ("n", "M_n", "at_least", "S_n", "pair_count")


@click.command("separation")
@run_options
def command(config_path, out, seed, threads):
    """M_n and S_n over the union of supports of mu^{*0..*n}."""
    run = CommandRun("separation", config_path, out, seed, threads)
    config = run.config

    profile = separation_profile(
        build_measure(config), config.separation.n_max, config.separation.support_cap
    )
    rows = [
        {
            "n": report.n,
            "M_n": report.M_n.value,
            "at_least": report.M_n.at_least,
            "S_n": report.S_n,
            "pair_count": report.pair_count,
        }
        for report in profile.reports
    ]

    run.write_csv("separation.csv", SEPARATION_COLUMNS, rows)
    run.finish()

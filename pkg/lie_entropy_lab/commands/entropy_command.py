import click

from lie_entropy_lab.commands.runner import CommandRun, run_options
from lie_entropy_lab.entropy import entropy_at_scale
from lie_entropy_lab.experiment import build_kernels, build_measure

ENTROPY_COLUMNS = ("r", "value", "std_error", "bias_budget", "n_samples")


@click.command("entropy")
@run_options
def command(config_path, out, seed, threads):
    """H_a(g; r) for every configured kernel scale, written to entropy.csv."""
    run = CommandRun("entropy", config_path, out, seed, threads)
    config = run.config
    measure = build_measure(config)

    rows = []
    for index, kernel in enumerate(build_kernels(config)):
        estimate = entropy_at_scale(
            measure,
            kernel,
            config.mc.n_samples,
            run.rng.child(index),
            run.threads,
            config.constants.chart_bias,
        )
        rows.append({"r": kernel.r, **estimate.to_record()})

    run.write_csv("entropy.csv", ENTROPY_COLUMNS, rows)
    run.finish()

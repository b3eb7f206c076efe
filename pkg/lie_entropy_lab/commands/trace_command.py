import click

from lie_entropy_lab.commands.runner import CommandRun, run_options
from lie_entropy_lab.conditioning import trace_at_scale_witness
from lie_entropy_lab.experiment import build_measure

TRACE_COLUMNS = ("r", "radius", "t", "std_error")


@click.command("trace")
@run_options
def command(config_path, out, seed, threads):
    """Witness lower bounds for tr(g; 2ar), written to trace.csv."""
    run = CommandRun("trace", config_path, out, seed, threads)
    config = run.config
    measure = build_measure(config)

    rows = []
    for index, r in enumerate(config.kernel.scales):
        witness = trace_at_scale_witness(
            measure, config.kernel.a, r, config.mc.n_samples, run.rng.child(index), run.threads
        )
        rows.append({"r": r, **witness.model_dump(include={"radius", "t", "std_error"})})

    run.write_csv("trace.csv", TRACE_COLUMNS, rows)
    run.finish()

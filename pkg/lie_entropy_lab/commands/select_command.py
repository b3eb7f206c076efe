import click

from lie_entropy_lab.commands.runner import CommandRun, run_options
from lie_entropy_lab.experiment import build_measure
from lie_entropy_lab.scales import entropy_gap_to_trace_sum

PROFILE_COLUMNS = ("u", "value", "std_error")


@click.command("select")
@run_options
def command(config_path, out, seed, threads):
    """Entropy-gap probes, trace profile and selected scales."""
    run = CommandRun("select", config_path, out, seed, threads)
    config = run.config
    scales = config.scales

    report = entropy_gap_to_trace_sum(
        build_measure(config),
        config.kernel.a,
        scales.r1,
        scales.r2,
        scales.A,
        config.mc.n_samples,
        run.rng,
        run.threads,
        grid_size=scales.grid_size,
        required_gap=scales.required_gap,
        sigmas=config.tolerances.sigmas,
        c_err=config.constants.c_err,
        chart_bias_constant=config.constants.chart_bias,
        shifts=scales.shifts or None,
    )

    run.write_csv("profile.csv", PROFILE_COLUMNS, report.profile.to_rows())
    run.write_json("selection.json", report.model_dump(mode="json", exclude={"profile"}))
    run.finish()

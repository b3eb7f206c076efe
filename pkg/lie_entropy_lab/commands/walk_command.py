import click

from lie_entropy_lab.commands.runner import CommandRun, run_options
from lie_entropy_lab.experiment import (
    build_entropy_horizon,
    build_generators,
    build_stopping,
    build_walk_exponent,
)
from lie_entropy_lab.walks import HARNESS_COLUMNS, ldp_check, theorem_harness


@click.command("walk")
@run_options
def command(config_path, out, seed, threads):
    """Stopped-walk harness (harness.csv, harness.json) and the LDP fit (ldp.json)."""
    run = CommandRun("walk", config_path, out, seed, threads)
    config = run.config
    walk = config.walk

    step = build_generators(config)
    spec = build_stopping(config, step)
    n_grid = walk.n_grid or spec.grid

    harness = theorem_harness(
        step,
        spec,
        walk.a,
        build_walk_exponent(config, step),
        n_grid,
        config.mc.n_samples,
        run.rng.child(0),
        run.threads,
        epsilon=walk.epsilon,
        c_G=config.constants.c_G,
        r_floor=walk.r_floor,
        chart_bias_constant=config.constants.chart_bias,
        support_cap=config.separation.support_cap,
        entropy_horizon=build_entropy_horizon(config),
    )
    ldp = ldp_check(
        step,
        spec,
        walk.ldp_epsilon,
        n_grid,
        config.mc.n_samples,
        run.rng.child(1),
        config.separation.support_cap,
    )

    run.write_csv("harness.csv", HARNESS_COLUMNS, [row.to_record() for row in harness.rows])
    run.write_json("harness.json", harness.model_dump(mode="json"))
    run.write_json("ldp.json", ldp.model_dump(mode="json"))
    run.finish()

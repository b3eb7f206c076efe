import time
from collections.abc import Iterable, Sequence
from datetime import UTC, datetime

import click

from lie_entropy_lab.config import get_output_url
from lie_entropy_lab.experiment import RunManifest, build_rng, load_config
from lie_entropy_lab.logger import logger
from lie_entropy_lab.storage import open_output, write_csv, write_json, write_manifest


def run_options(function):
    """--config, --out, --seed and --threads, shared by every command."""
    options = [
        click.option(
            "--config",
            "config_path",
            type=click.Path(exists=True, dir_okay=False),
            help="Experiment configuration (JSON). Defaults to the built-in experiment.",
        ),
        click.option("--out", help="Output directory or PyFilesystem URL."),
        click.option("--seed", type=click.IntRange(min=0), help="Overrides mc.seed."),
        click.option(
            "--threads",
            type=click.IntRange(min=1),
            default=1,
            show_default=True,
            help="Worker threads; results do not depend on it.",
        ),
    ]
    for option in reversed(options):
        function = option(function)
    return function


class CommandRun:
    """Config, randomness and output location of one command invocation."""

    def __init__(
        self,
        command: str,
        config_path: str | None,
        out: str | None,
        seed: int | None,
        threads: int,
    ):
        self.command = command
        self.config = load_config(config_path)
        self.rng = build_rng(self.config, seed)
        self.threads = threads
        self.filesystem = open_output(get_output_url(out))
        self.outputs: list[str] = []
        self.started_at = datetime.now(UTC)
        self._start = time.perf_counter()
        logger.info(
            f"Running {command!r} with seed {self.rng.seed} on {threads} thread(s), "
            f"config {self.config.config_hash[:12]!r}"
        )

    def write_csv(self, file_name: str, columns: Sequence[str], rows: Iterable[dict]):
        self.outputs.append(write_csv(self.filesystem, file_name, columns, rows))

    def write_json(self, file_name: str, data):
        self.outputs.append(write_json(self.filesystem, file_name, data))

    def finish(self):
        manifest = RunManifest(
            command=self.command,
            config_hash=self.config.config_hash,
            seed=self.rng.seed,
            threads=self.threads,
            started_at=self.started_at,
            duration_seconds=time.perf_counter() - self._start,
            outputs=self.outputs,
        )
        write_manifest(self.filesystem, manifest)
        self.filesystem.close()
        logger.info(f"{self.command!r} finished in {manifest.duration_seconds:.1f}s")

import json

import pytest
from click.testing import CliRunner

from lie_entropy_lab.cli import main


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def write_config(tmp_path):
    def write(data: dict) -> str:
        path = tmp_path / "config.json"
        path.write_text(json.dumps(data))
        return str(path)

    return write


def _invoke(runner, *args):
    return runner.invoke(main, list(args), catch_exceptions=False)


class TestRunCommands:
    def test_entropy_does_not_depend_on_threads(self, runner, write_config, tmp_path):
        config = write_config({"mc": {"n_samples": 10000}})
        outputs = []
        for threads in ("1", "4"):
            out = tmp_path / f"threads-{threads}"
            result = _invoke(
                runner, "entropy", "--config", config, "--out", str(out), "--threads", threads
            )
            assert result.exit_code == 0
            outputs.append((out / "entropy.csv").read_bytes())

        assert outputs[0] == outputs[1]
        lines = outputs[0].decode().splitlines()
        assert lines[0] == "r,value,std_error,bias_budget,n_samples"
        assert len(lines) == 4

    def test_separation(self, runner, tmp_path):
        out = tmp_path / "separation"
        result = _invoke(runner, "separation", "--out", str(out))
        assert result.exit_code == 0

        lines = (out / "separation.csv").read_text().splitlines()
        assert lines[0] == "n,M_n,at_least,S_n,pair_count"
        assert len(lines) == 7
        for n, line in enumerate(lines[1:], start=1):
            cells = line.split(",")
            assert cells[0] == str(n)
            assert cells[1:3] == ["0.5", "true"]

        manifest = json.loads((out / "manifest-separation.json").read_text())
        assert manifest["outputs"] == ["separation.csv"]

    def test_trace(self, runner, write_config, tmp_path):
        config = write_config({"mc": {"n_samples": 2000}})
        out = tmp_path / "trace"
        result = _invoke(runner, "trace", "--config", config, "--out", str(out), "--seed", "5")
        assert result.exit_code == 0
        assert (out / "trace.csv").read_text().startswith("r,radius,t,std_error\n")
        assert json.loads((out / "manifest-trace.json").read_text())["seed"] == 5

    def test_walk(self, runner, write_config, tmp_path):
        config = write_config({"mc": {"n_samples": 1000}})
        out = tmp_path / "walk"
        result = _invoke(runner, "walk", "--config", config, "--out", str(out))
        assert result.exit_code == 0
        for name in ("harness.csv", "harness.json", "ldp.json", "manifest-walk.json"):
            assert (out / name).exists()

    def test_verify_single_suite(self, runner, tmp_path):
        out = tmp_path / "verify"
        result = _invoke(runner, "verify", "--suite", "lie_core", "--out", str(out))
        assert result.exit_code == 0
        record = json.loads((out / "verify.json").read_text())
        assert record["passed"] is True
        assert {check["suite"] for check in record["checks"]} == {"lie_core"}


class TestExitCodes:
    def test_kernel_scale_beyond_chart(self, runner, write_config, tmp_path):
        config = write_config({"kernel": {"a": 2.0, "scales": [0.3]}})
        result = runner.invoke(main, ["entropy", "--config", config, "--out", str(tmp_path)])
        assert result.exit_code == 2

    def test_negative_tolerance(self, runner, write_config, tmp_path):
        config = write_config({"tolerances": {"sigmas": -1.0}})
        result = runner.invoke(main, ["verify", "--config", config, "--out", str(tmp_path)])
        assert result.exit_code == 2

    def test_unknown_suite(self, runner):
        result = runner.invoke(main, ["verify", "--suite", "everything"])
        assert result.exit_code == 2

"""The deterministic property suites behind `lie-entropy-lab verify`."""

import numpy as np
import pytest

from lie_entropy_lab.experiment import ExperimentConfig
from lie_entropy_lab.groups import LieGroupModel, jacobian_batch
from lie_entropy_lab.montecarlo import RngStream
from lie_entropy_lab.verification import (
    SUITES,
    CheckResult,
    VerificationReport,
    finite_difference_jacobian,
    run_suites,
)


@pytest.fixture(scope="module")
def config():
    return ExperimentConfig.model_validate({"mc": {"n_samples": 2000}})


class TestRunSuites:
    @pytest.mark.parametrize("name", ["lie_core", "discrete_measure", "scale_pipeline"])
    def test_suite_passes(self, config, name):
        report = run_suites(config, RngStream(seed=3), names=[name])
        assert report.checks
        assert {check.suite for check in report.checks} == {name}
        assert report.passed, [check.name for check in report.failures]

    def test_report_record(self, config):
        report = run_suites(config, RngStream(seed=3), names=["scale_pipeline"])
        record = report.to_record()
        assert record["passed"] is True
        assert record["config_hash"] == config.config_hash
        assert record["seed"] == 3

    def test_suite_names(self):
        assert list(SUITES) == [
            "lie_core",
            "discrete_measure",
            "smoothing",
            "entropy_mc",
            "conditioning",
            "scale_pipeline",
            "walks",
        ]


class TestVerificationReport:
    def test_failures(self):
        checks = [
            CheckResult(suite="walks", name="held", passed=True, margin=0.0),
            CheckResult(suite="walks", name="broken", passed=False, margin=-0.1),
        ]
        report = VerificationReport(config_hash="0" * 64, seed=0, checks=checks)
        assert not report.passed
        assert [check.name for check in report.failures] == ["broken"]
        assert report.to_record()["passed"] is False


class TestFiniteDifferenceJacobian:
    @pytest.mark.parametrize("name", ["sl2r", "so3", "heisenberg3"])
    def test_matches_closed_form(self, name):
        model = LieGroupModel.create(name)
        coords = np.array([0.05, -0.02, 0.03])
        expected = float(jacobian_batch(model, coords[None])[0])
        assert finite_difference_jacobian(model, coords) == pytest.approx(expected, abs=1e-6)


class TestJacobianBound:
    def test_tight_bound_flags_curved_models(self):
        config = ExperimentConfig.model_validate(
            {"mc": {"n_samples": 2000}, "constants": {"jacobian_bound": 1e-9}}
        )
        report = run_suites(config, RngStream(seed=3), names=["lie_core"])
        assert not report.passed
        assert report.failures
        assert all(check.name.startswith("|j(X) - 1| <= K|X|") for check in report.failures)

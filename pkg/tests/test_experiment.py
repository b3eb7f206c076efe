import json
import math
from datetime import datetime
from fractions import Fraction
from pathlib import Path

import pytest
from pydantic import ValidationError

from lie_entropy_lab.errors import ConfigError
from lie_entropy_lab.experiment import (
    ExperimentConfig,
    RunManifest,
    build_entropy_horizon,
    build_generators,
    build_kernels,
    build_measure,
    build_rng,
    build_stopping,
    build_walk_exponent,
    generator_atom_indices,
    load_config,
    parse_scalar,
)
from lie_entropy_lab.groups import ModelName
from lie_entropy_lab.walks import StoppingKind

DEFAULT_CONFIG = Path(__file__).parents[1] / "configs" / "default.json"


class TestScalars:
    def test_integers_stay_exact(self):
        assert parse_scalar(2) == Fraction(2)
        assert isinstance(parse_scalar(2), Fraction)

    def test_rational_strings(self):
        assert parse_scalar("1/3") == Fraction(1, 3)
        assert parse_scalar(" -2/4 ") == Fraction(-1, 2)

    def test_decimals_become_floats(self):
        assert parse_scalar("0.25") == 0.25
        assert parse_scalar(0.5) == 0.5

    @pytest.mark.parametrize("value", [True, "one half", "1/0", None])
    def test_rejected(self, value):
        with pytest.raises(ValueError):
            parse_scalar(value)


class TestExperimentConfig:
    def test_defaults(self):
        config = ExperimentConfig()
        assert config.model.name is ModelName.sl2r
        assert config.stopping.kind is StoppingKind.renewal
        assert config.kernel.scales == [0.01, 0.02, 0.04]

    def test_shipped_config(self):
        config = load_config(str(DEFAULT_CONFIG))
        assert config.stopping.costs == {0: Fraction(1), 1: Fraction(2)}
        assert build_measure(config).weights == [Fraction(1, 2), Fraction(1, 2)]

    def test_rationals_serialize_as_strings(self):
        config = ExperimentConfig.model_validate({"measure": {"weights": ["1/3", "2/3"]}})
        assert config.measure.weights == [Fraction(1, 3), Fraction(2, 3)]
        assert config.model_dump(mode="json")["measure"]["weights"] == ["1/3", "2/3"]

    def test_unknown_keys_are_rejected(self):
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate({"kernel": {"a": 2.0, "radius": 0.1}})

    def test_kernel_scale_beyond_chart(self):
        with pytest.raises(ValidationError, match="a\\*r < chart_radius"):
            ExperimentConfig.model_validate({"kernel": {"a": 2.0, "scales": [0.3]}})

    def test_profile_range_beyond_chart(self):
        with pytest.raises(ValidationError, match="2\\*a\\*r_hi"):
            ExperimentConfig.model_validate({"scales": {"r_hi": 0.2}})

    def test_negative_tolerance(self):
        with pytest.raises(ValidationError, match="tolerances.sigmas"):
            ExperimentConfig.model_validate({"tolerances": {"sigmas": -1.0}})

    def test_weights_match_generators(self):
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate({"measure": {"weights": ["1/2"]}})

    def test_hash_tracks_content(self):
        base = ExperimentConfig()
        reseeded = ExperimentConfig.model_validate({"mc": {"seed": 1}})
        assert base.config_hash == ExperimentConfig().config_hash
        assert base.config_hash != reseeded.config_hash


class TestBuilders:
    def test_sanov_measure(self):
        measure = build_measure(ExperimentConfig())
        assert measure.support_size == 2
        assert measure.is_exact
        assert measure.weights == [Fraction(1, 2), Fraction(1, 2)]

    def test_convolution_power(self):
        measure = build_measure(ExperimentConfig.model_validate({"measure": {"power": 3}}))
        assert measure.support_size == 8

    def test_abelian_measure(self):
        config = ExperimentConfig.model_validate(
            {
                "model": {"name": "abelian", "dim": 1},
                "measure": {"generators": [[0], ["1/10"]], "weights": ["1/4", "3/4"]},
            }
        )
        measure = build_measure(config)
        assert [atom.element.exact for atom in measure.atoms] == [
            (Fraction(0),),
            (Fraction(1, 10),),
        ]
        assert measure.weights == [Fraction(1, 4), Fraction(3, 4)]

    def test_kernels(self):
        kernels = build_kernels(ExperimentConfig())
        assert [kernel.r for kernel in kernels] == [0.01, 0.02, 0.04]
        assert all(kernel.a == 2.0 for kernel in kernels)

    def test_seed_override(self):
        config = ExperimentConfig()
        assert build_rng(config).seed == 0
        assert build_rng(config, 42).seed == 42

    def test_walk_exponent(self):
        config = ExperimentConfig()
        step = build_measure(config)
        assert build_walk_exponent(config, step) == pytest.approx(1.1 * math.log(2))
        fixed = ExperimentConfig.model_validate({"walk": {"S": 3.0}})
        assert build_walk_exponent(fixed, step) == 3.0


class TestLoadConfig:
    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_rejected_config_names_the_field(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"tolerances": {"dedup_tol": 0}}))
        with pytest.raises(ConfigError, match="tolerances"):
            load_config(str(path))

    def test_default_when_no_path(self):
        assert load_config(None) == ExperimentConfig()


class TestRunManifest:
    def test_needs_timezone(self):
        with pytest.raises(ValidationError):
            RunManifest(
                command="entropy",
                config_hash="0" * 64,
                seed=0,
                threads=1,
                started_at=datetime(2024, 1, 1),  # noqa: DTZ001
                duration_seconds=1.0,
                outputs=[],
            )


class TestStoppingCosts:
    def test_generators_map_to_their_atoms(self):
        config = ExperimentConfig()
        step = build_generators(config)
        # the second Sanov generator sorts first
        assert generator_atom_indices(config, step) == [1, 0]

    def test_costs_follow_the_generator_order(self):
        config = ExperimentConfig()
        spec = build_stopping(config, build_generators(config))
        assert spec.costs == {1: Fraction(1), 0: Fraction(2)}

    def test_near_duplicate_generators_share_an_atom(self):
        config = ExperimentConfig.model_validate(
            {
                "model": {"name": "abelian", "dim": 1},
                "measure": {"generators": [[0.0], [1e-12], ["1/2"]]},
                "stopping": {"costs": {"0": 1, "1": 1, "2": 2}},
            }
        )
        step = build_generators(config)
        assert step.support_size == 2
        assert generator_atom_indices(config, step) == [0, 0, 1]
        assert build_stopping(config, step).costs == {0: Fraction(1), 1: Fraction(2)}

    def test_merged_generators_need_equal_costs(self):
        config = ExperimentConfig.model_validate(
            {
                "model": {"name": "abelian", "dim": 1},
                "measure": {"generators": [[0], [0], ["1/2"]]},
                "stopping": {"costs": {"0": 1, "1": 2, "2": 1}},
            }
        )
        with pytest.raises(ConfigError, match="stopping.costs"):
            build_stopping(config, build_generators(config))

    def test_one_cost_per_generator(self):
        with pytest.raises(ValidationError, match="stopping.costs"):
            ExperimentConfig.model_validate({"stopping": {"costs": {"0": 1}}})

    def test_deterministic_times_ignore_costs(self):
        config = ExperimentConfig.model_validate(
            {"stopping": {"kind": "deterministic", "schedule": [2, 3]}}
        )
        spec = build_stopping(config, build_generators(config))
        assert spec.costs is None
        assert spec.schedule == [Fraction(2), Fraction(3)]

    def test_entropy_horizon(self):
        assert build_entropy_horizon(ExperimentConfig()) == 6
        config = ExperimentConfig.model_validate({"walk": {"entropy_horizon": 3}})
        assert build_entropy_horizon(config) == 3

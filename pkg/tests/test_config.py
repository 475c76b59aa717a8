import pytest

from deconv.config import (
    EstimateConfig,
    ExperimentConfig,
    default_variant,
    kn_policy,
    parse_config,
    parse_grid,
    validate_config,
)
from deconv.errors import ConfigurationError, SamplesFormatError
from deconv.estimator import KnMode, PenaltyVariant
from deconv.noise import builtin_noise
from deconv.utils.source import read_samples, unflatten_keys
from tests.common import get_file_json, get_file_yaml, get_resource_file_path


def test_parse_estimate_config():
    config = parse_config(get_resource_file_path("estimate.yaml"), "estimate")
    assert isinstance(config, EstimateConfig)
    assert config.noise.name == "laplace"
    assert config.noise.scale == 0.5
    assert config.m_max == 4
    assert config.grid_points().tolist() == [
        -3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0
    ]


def test_estimate_defaults():
    config = parse_config(get_resource_file_path("minimal-estimate.yaml"))
    assert isinstance(config, EstimateConfig)
    assert config.penalty.a == 1.5
    assert config.penalty.variant is None
    assert config.kn == "auto"
    assert config.noise.scale == 1.0
    assert config.m_max is None


def test_unknown_key_is_named():
    with pytest.raises(ConfigurationError) as error:
        parse_config(get_resource_file_path("unknown-key.yaml"))
    assert "noize" in str(error.value)


def test_empty_file():
    with pytest.raises(ConfigurationError) as error:
        parse_config(get_resource_file_path("empty.yaml"), "estimate")
    assert "input" in str(error.value)


def test_broken_file():
    with pytest.raises(ConfigurationError):
        parse_config(get_resource_file_path("broken.yaml"))


def test_missing_file():
    with pytest.raises(ConfigurationError):
        parse_config("tests/res/not-existing.yaml")


def test_unsupported_extension():
    with pytest.raises(ConfigurationError):
        parse_config(get_resource_file_path("samples.csv"))


def test_parse_experiment_config():
    config = parse_config(get_resource_file_path("experiment.yaml"))
    assert isinstance(config, ExperimentConfig)
    assert config.n_values == [50, 100]
    assert config.target.params == {"mean": 0.0, "sd": 1.0}
    assert config.require_seed() == 42
    assert config.quad.build().tolerance == 1e-6


def test_parse_flat_toml_config():
    config = parse_config(get_resource_file_path("experiment.toml"))
    assert isinstance(config, ExperimentConfig)
    assert config.target.name == "uniform"
    assert config.process.name == "bernoulli_ar"
    assert config.noise.scale == 0.5
    assert config.include_oracle is False


def test_experiment_without_seed():
    config = parse_config(get_resource_file_path("experiment-no-seed.json"))
    with pytest.raises(ConfigurationError) as error:
        config.require_seed()
    assert error.value.key_path == "seed"


@pytest.mark.parametrize(
    "data,key_path",
    [
        ({"noise": {"name": "cauchy"}, "n_values": [10]}, "noise.name"),
        ({"noise": {"name": "none"}, "n_values": [20, 10]}, "n_values"),
        ({"noise": {"name": "none"}, "n_values": [1]}, "n_values"),
        ({"noise": {"name": "none", "scale": -1}, "n_values": [10]}, "noise.scale"),
        (
            {"noise": {"name": "none"}, "n_values": [10], "penalty": {"a": 1.0}},
            "penalty.a",
        ),
        (
            {"noise": {"name": "none"}, "n_values": [10], "target": {"name": "beta"}},
            "target",
        ),
    ],
)
def test_invalid_experiment_configs(data, key_path):
    with pytest.raises(ConfigurationError) as error:
        validate_config(data, "experiment")
    assert error.value.key_path == key_path


def test_unknown_configuration_kind():
    with pytest.raises(ConfigurationError):
        validate_config({}, "report")


def test_unflatten_keys():
    assert unflatten_keys({"noise.name": "laplace", "noise.scale": 2, "seed": 1}) == {
        "noise": {"name": "laplace", "scale": 2},
        "seed": 1,
    }
    assert unflatten_keys({"noise": {"name": "laplace"}, "noise.scale": 2}) == {
        "noise": {"name": "laplace", "scale": 2}
    }


def test_unflatten_conflicting_keys():
    with pytest.raises(ConfigurationError):
        unflatten_keys({"noise": "laplace", "noise.scale": 2})


@pytest.mark.parametrize(
    "value,expected",
    [
        ("-1:1:0.5", [-1.0, -0.5, 0.0, 0.5, 1.0]),
        ("0:1:0.3", [0.0, 0.3, 0.6, 0.9]),
        ("0:0.3:0.1", [0.0, 0.1, 0.2, 0.3]),
    ],
)
def test_parse_grid(value, expected):
    assert parse_grid(value).tolist() == pytest.approx(expected)


@pytest.mark.parametrize("value", ["1:0:0.1", "0:1:0", "0:1", "a:b:c"])
def test_parse_invalid_grid(value):
    with pytest.raises(ConfigurationError):
        parse_grid(value)


def test_kn_policy():
    assert kn_policy("auto") is KnMode.AUTO
    assert kn_policy("exact") is KnMode.EXACT
    assert kn_policy(128) == 128


@pytest.mark.parametrize(
    "name,scale,expected",
    [
        ("none", 1.0, PenaltyVariant.NO_NOISE),
        ("laplace", 0.5, PenaltyVariant.ORDINARY),
        ("gaussian", 0.3, PenaltyVariant.SUPERSMOOTH),
    ],
)
def test_default_variant(name, scale, expected):
    assert default_variant(builtin_noise(name, scale)) is expected


def test_read_samples():
    samples = read_samples(get_resource_file_path("samples.csv"))
    assert len(samples) == 40
    assert samples[0] == 0.4317
    assert samples[1] == -1.2052


def test_read_samples_names_the_bad_line():
    with pytest.raises(SamplesFormatError) as error:
        read_samples(get_resource_file_path("bad-samples.csv"))
    assert error.value.line == 4
    assert "'abc'" in str(error.value)


def test_read_samples_refuses_non_finite_values():
    with pytest.raises(SamplesFormatError) as error:
        read_samples(get_resource_file_path("nan-samples.csv"))
    assert error.value.line == 2


def test_read_samples_refuses_several_columns():
    with pytest.raises(SamplesFormatError) as error:
        read_samples(get_resource_file_path("multi-column-samples.csv"))
    assert error.value.line == 1
    assert "more than one column" in str(error.value)


def test_read_samples_ignores_empty_cells():
    assert read_samples(get_resource_file_path("trailing-comma-samples.csv")) == [
        0.25,
        -1.5,
    ]


def test_read_missing_samples_file():
    with pytest.raises(ConfigurationError):
        read_samples("tests/res/not-existing.csv")


def test_nested_and_flat_keys_are_equivalent():
    nested = get_file_yaml("experiment.yaml")
    flat = {
        "target.name": "gaussian",
        "target.mean": 0.0,
        "target.sd": 1.0,
        "noise.name": "laplace",
        "noise.scale": 0.5,
        "process.name": "iid",
        "n_values": [50, 100],
        "replications": 3,
        "oracle_replications": 2,
        "seed": 42,
        "kn": "auto",
        "m_max": 3,
        "workers": 1,
        "quad.tolerance": 1e-6,
    }
    assert validate_config(nested, "experiment") == validate_config(flat, "experiment")


def test_kind_is_inferred_from_the_input_key():
    data = get_file_json("experiment-no-seed.json")
    assert isinstance(validate_config(data), ExperimentConfig)
    data["input"] = "samples.csv"
    with pytest.raises(ConfigurationError):
        validate_config(data)

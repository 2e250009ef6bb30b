import logging

import pytest
from pydantic import ValidationError

from config import (AppConfig, ExperimentConfig, build_experiment_config,
                    get_config, load_experiment_config, parse_dotted,
                    setup_logging)
from errors import ConfigError, OutputIOError


def test_parse_dotted():
    tree = parse_dotted(
        "# comment line\n"
        "\n"
        "memory.half_life_us = 1.3   # trailing comment\n"
        "acquisition.phases_deg = 0, 45, 90\n"
        "preparation.lambda = 0.2\n")
    assert tree == {
        "memory": {"half_life_us": "1.3"},
        "acquisition": {"phases_deg": "0, 45, 90"},
        "preparation": {"lambda": "0.2"},
    }


def test_lists_and_aliases_are_coerced():
    experiment = build_experiment_config(parse_dotted(
        "acquisition.storage_times_ns = 0, 200, 400\n"
        "preparation.lambda = 0.2\n"))
    assert experiment.acquisition.storage_times_ns == [0.0, 200.0, 400.0]
    assert experiment.preparation.lambda_ == 0.2
    assert experiment.ideal is None


def test_defaults_use_ideal_source():
    experiment = ExperimentConfig()
    assert experiment.ideal is not None
    assert experiment.preparation is None
    assert experiment.memory.half_life_us == 1.3
    assert experiment.acquisition.phases_deg == [0.0, 30.0, 60.0, 90.0, 120.0, 150.0]


@pytest.mark.parametrize("text, key_path", [
    ("memory.half_life_us = -1\n", "memory.half_life_us"),
    ("memory.colour = blue\n", "memory.colour"),
    ("acquisition.n_per_phase = many\n", "acquisition.n_per_phase"),
    ("ideal.alpha = 0.9\n", "ideal"),
    ("acquisition.seed = -1\n", "acquisition.seed"),
    ("acquisition.seed = 18446744073709551616\n", "acquisition.seed"),
])
def test_validation_errors_name_the_key(text, key_path):
    with pytest.raises(ConfigError) as excinfo:
        build_experiment_config(parse_dotted(text))
    assert excinfo.value.key_path == key_path
    assert str(excinfo.value).startswith(key_path)
    assert excinfo.value.exit_code == 2


def test_malformed_lines():
    with pytest.raises(ConfigError):
        parse_dotted("memory.half_life_us 1.3\n")
    with pytest.raises(ConfigError) as excinfo:
        parse_dotted("seed = 3\n")
    assert excinfo.value.key_path == "seed"


def test_both_state_sources_rejected():
    with pytest.raises(ConfigError):
        build_experiment_config(parse_dotted("preparation.lambda = 0.1\nideal.theta_deg = 10\n"))


def test_load_experiment_config(experiment_file):
    experiment = load_experiment_config(str(experiment_file))
    assert experiment.acquisition.storage_times_ns == [0.0, 400.0]
    assert experiment.acquisition.seed == 11
    assert experiment.analysis.reconstruction_dim == 6
    assert load_experiment_config(None) == ExperimentConfig()


def test_missing_config_file(tmp_path):
    with pytest.raises(OutputIOError):
        load_experiment_config(str(tmp_path / "absent.cfg"))


def test_app_config_validation():
    assert AppConfig(log_level="debug").log_level == "DEBUG"
    assert AppConfig(log_format="PLAIN").log_format == "plain"
    with pytest.raises(ValidationError):
        AppConfig(log_level="loud")
    with pytest.raises(ValidationError):
        AppConfig(compute_dim=1)
    with pytest.raises(ValidationError):
        AppConfig(displacement_guard=0.0)


def test_app_config_reads_environment(monkeypatch):
    monkeypatch.setenv("QMEM_WITNESS_DIM", "30")
    assert AppConfig().witness_dim == 30


def test_trace_grid_defaults(monkeypatch):
    monkeypatch.delenv("QMEM_TRACE_STEP_NS", raising=False)
    monkeypatch.delenv("QMEM_TRACE_WINDOW_NS", raising=False)
    settings = AppConfig(_env_file=None)
    assert settings.trace_step_ns == 2.0
    assert settings.trace_window_ns == 2000.0


def test_setup_logging_without_file():
    logger = setup_logging(AppConfig(log_level="DEBUG", log_format="plain", log_file=""))
    try:
        assert logger.name == "qmem"
        assert not logger.propagate
        assert len(logger.handlers) == 1
        assert logger.level == logging.DEBUG
    finally:
        setup_logging(get_config())

import pytest

import toml

from strider.helpers import ConfigError, default_config, framework_to_dict, parse_config
from strider.helpers.cfg_utils import dump_config, parse_literal, read_config_file
from strider.training import Experiment


@pytest.fixture(scope="module")
def defaults():
    return default_config()


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_empty_file_is_defaults(tmp_path, defaults):
    assert parse_config(_write(tmp_path, ""), environ={}) == defaults


def test_defaults_complete(defaults):
    assert set(defaults) == set(Experiment.get_all_parameter_names())
    assert defaults["temporal_model"] == "LSTM"
    assert defaults["feature_dir"] is None


def test_lambda_alias(tmp_path):
    cfg = parse_config(_write(tmp_path, "lambda = 0.15\n"), environ={})
    assert cfg["lam"] == 0.15
    assert "lambda" not in cfg


def test_int_for_float(tmp_path):
    assert parse_config(_write(tmp_path, "lam = 0\n"), environ={})["lam"] == 0.0


def test_rejected_value(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(_write(tmp_path, "delta = -1\n"), environ={})


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError, match="unknown config key 'strides'"):
        parse_config(_write(tmp_path, "strides = 3\n"), environ={})


@pytest.mark.parametrize(
    "line",
    ['lam = "high"', "n_locators = 2.5", "region_fence = 1", "temporal_model = 3"],
)
def test_type_mismatch(tmp_path, line):
    with pytest.raises(ConfigError):
        parse_config(_write(tmp_path, line + "\n"), environ={})


def test_bad_toml(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(_write(tmp_path, "lam = = 1\n"), environ={})


def test_unknown_model(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(_write(tmp_path, 'integrator_model = "GRU"\n'), environ={})


class TestPrecedence:
    def test_env_beats_file(self, tmp_path):
        path = _write(tmp_path, "lam = 0.1\nn_locators = 5\n")
        cfg = parse_config(path, environ={"STRIDER_LAMBDA": "0.3"})
        assert cfg["lam"] == 0.3
        assert cfg["n_locators"] == 5

    def test_overrides_beat_env(self, tmp_path):
        cfg = parse_config(
            _write(tmp_path, "lam = 0.1\n"),
            overrides={"lam": 0.05},
            environ={"STRIDER_LAM": "0.3"},
        )
        assert cfg["lam"] == 0.05

    def test_env_literals(self):
        env = {"STRIDER_REGION_FENCE": "true", "STRIDER_WARMUP_STRATEGY": "uniform50"}
        cfg = parse_config(environ=env)
        assert cfg["region_fence"] is True
        assert cfg["warmup_strategy"] == "uniform50"

    def test_unrelated_env_ignored(self):
        cfg = parse_config(environ={"STRIDER_COLOUR": "blue", "HOME": "/root"})
        assert "colour" not in cfg

    def test_bad_override(self):
        with pytest.raises(ConfigError):
            parse_config(overrides={"n_locators": 0}, environ={})


def test_snapshot_is_valid_input(tmp_path):
    exp = Experiment(lam=0.15, n_locators=5, temporal_params={"hidden_dim": 32})
    path = tmp_path / "config.toml"
    dump_config(framework_to_dict(exp), path)
    snap = toml.load(path)
    assert snap["params"]["temporal_model"] == "LSTM"
    assert "strider_version" in snap

    cfg = parse_config(path, environ={})
    assert cfg["lam"] == 0.15
    assert cfg["n_locators"] == 5
    assert cfg["temporal_params"] == {"hidden_dim": 32}


def test_read_flat_and_nested(tmp_path):
    flat = _write(tmp_path, "lam = 0.2\n", "flat.toml")
    nested = _write(tmp_path, "[params]\nlam = 0.2\n", "nested.toml")
    assert read_config_file(flat) == read_config_file(nested) == {"lam": 0.2}


@pytest.mark.parametrize(
    "raw,value",
    [("3", 3), ("0.5", 0.5), ("true", True), ("LSTM", "LSTM"), ('"LSTM"', "LSTM")],
)
def test_parse_literal(raw, value):
    assert parse_literal(raw) == value

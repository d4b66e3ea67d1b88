"""Utilities for reading strider TOML configs and writing config snapshots."""
import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Type, Union

import toml

from .. import __version__
from .._internals import Framework

logger = logging.getLogger(__name__)

ENV_PREFIX = "STRIDER_"

# Config spellings that are not valid Python identifiers.
ALIASES = {"lambda": "lam"}


class ConfigError(ValueError):
    pass


def _default_framework() -> Type[Framework]:
    from ..training import Experiment

    return Experiment


def framework_to_dict(obj: Framework) -> dict:
    """Serialize a framework instance to a simple TOML-able dictionary."""
    out = {"created_on": datetime.now(), "strider_version": __version__, "params": {}}

    for k, v in obj.parameter_values.items():
        if k.endswith("_model"):
            # The class name, not the class.
            out["params"][k] = v.__name__
        elif k.endswith("_params"):
            out["params"][k] = dict(v)
        elif v is not None:
            out["params"][k] = v

    return out


def default_config(framework: Optional[Type[Framework]] = None) -> Dict[str, Any]:
    """Every parameter of ``framework`` with its default, in config form."""
    framework = framework or _default_framework()
    params = framework_to_dict(framework())["params"]
    for name in framework.get_all_parameter_names():
        params.setdefault(name, None)
    return params


def parse_literal(raw: str) -> Any:
    """Parse a value given as text, as a TOML literal if possible, else as a bare string."""
    try:
        return toml.loads(f"v = {raw}")["v"]
    except toml.TomlDecodeError:
        return raw


def _check_type(key: str, value, default):
    if default is None:
        if not isinstance(value, str):
            raise ConfigError(f"'{key}' must be a string, got {value!r}")
    elif isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"'{key}' must be true or false, got {value!r}")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{key}' must be a number, got {value!r}")
        return float(value)
    elif not isinstance(value, type(default)):
        raise ConfigError(f"'{key}' must be of type {type(default).__name__}, got {value!r}")
    return value


def _normalise(source: str, dct: Mapping[str, Any], defaults: Mapping[str, Any]) -> dict:
    out = {}
    for key, value in dct.items():
        key = ALIASES.get(key, key)
        if key not in defaults:
            raise ConfigError(f"unknown config key '{key}' ({source})")
        out[key] = _check_type(key, value, defaults[key])
    return out


def read_config_file(path: Union[str, Path]) -> dict:
    """Read the parameter table of a TOML config.

    Both a flat file of ``key = value`` lines and a snapshot written by
    :func:`framework_to_dict` (parameters under ``[params]``) are accepted.
    """
    try:
        cfg = toml.load(path)
    except toml.TomlDecodeError as e:
        raise ConfigError(f"{path}: {e}")
    if "params" in cfg and isinstance(cfg["params"], dict):
        return cfg["params"]
    return cfg


def parse_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
    framework: Optional[Type[Framework]] = None,
) -> Dict[str, Any]:
    """
    Resolve a complete run configuration.

    Precedence, lowest first: parameter defaults, the config file, environment
    variables ``STRIDER_<KEY>`` and ``overrides`` (usually CLI arguments).

    Parameters
    ----------
    path
        Optional TOML config file.
    overrides
        Highest-precedence values.
    environ
        Environment to read overrides from; defaults to ``os.environ``.
    framework
        The framework class the config is for; defaults to
        :class:`~strider.training.Experiment`.

    Returns
    -------
    dict
        Every parameter of ``framework``, ready to be passed to its constructor.

    Raises
    ------
    ConfigError
        On unknown keys, mistyped values, or values a parameter rejects.

    Examples
    --------
    >>> parse_config(overrides={"lambda": 0.2})["lam"]
    0.2
    """
    framework = framework or _default_framework()
    environ = os.environ if environ is None else environ
    defaults = default_config(framework)

    cfg = dict(defaults)
    if path is not None:
        cfg.update(_normalise(str(path), read_config_file(path), defaults))

    env = {}
    for var, raw in environ.items():
        if not var.startswith(ENV_PREFIX):
            continue
        key = var[len(ENV_PREFIX) :].lower()
        if ALIASES.get(key, key) not in defaults:
            logger.debug(f"ignoring environment variable {var}")
            continue
        env[key] = parse_literal(raw)
    cfg.update(_normalise("environment", env, defaults))

    cfg.update(_normalise("overrides", overrides or {}, defaults))

    try:
        framework(**cfg)
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from e
    return cfg


def dump_config(dct: dict, path: Union[str, Path]):
    with open(path, "w") as fl:
        toml.dump(dct, fl, encoder=toml.TomlNumpyEncoder())

"""Photoacoustic tomography reconstruction toolkit.

Configuration dictionaries use the same keys as the command line tool's
key = value files (see ``config_keys()``). Values may be numbers, strings or
sequences; sequences are joined with commas.
"""

from collections.abc import Mapping

from . import _core
from ._core import (
    ConfigError,
    FormatError,
    IoError,
    NumericalError,
    approximate_inverse,
    config_keys,
    cosine_lr,
    evaluate,
    haarpsi,
    num_threads,
    pearson_cc,
    psnr,
    read_raw,
    set_num_threads,
    ssim,
    write_raw,
    add_relative_noise,
)

__all__ = [
    "ConfigError", "FormatError", "IoError", "NumericalError", "Operator",
    "add_relative_noise", "approximate_inverse", "config_keys", "cosine_lr",
    "dip_reconstruct", "evaluate", "haarpsi", "num_threads", "pearson_cc", "psnr",
    "read_raw", "resolve_config", "run_experiment", "set_num_threads", "simulate",
    "ssim", "tv_reconstruct", "write_raw",
]


def _text(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_text(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _kv(config):
    if config is None:
        return {}
    if not isinstance(config, Mapping):
        raise TypeError("config must be a mapping of key -> value")
    return {str(k): _text(v) for k, v in config.items()}


def resolve_config(config=None):
    """Fully resolved configuration as a key -> string dictionary."""
    return _core.resolve_config(_kv(config))


class Operator(_core.Operator):
    """Forward operator for a configuration (grid.*, ring.*, time.* keys)."""

    def __init__(self, config=None):
        super().__init__(_kv(config))


def simulate(config=None):
    return _core.simulate(_kv(config))


def tv_reconstruct(data, op, config=None, gt=None):
    return _core.tv_reconstruct(data, op, _kv(config), gt)


def dip_reconstruct(data, z, op, config=None, gt=None):
    return _core.dip_reconstruct(data, z, op, _kv(config), gt)


def run_experiment(config=None):
    return _core.run_experiment(_kv(config))

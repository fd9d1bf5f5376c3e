"""Utilities for reading and modifying riscv_supplychain configuration.

Configuration is stored in a file. By default, the file is stored in the
directory "$HOME/.config/riscv_supplychain". This can be overridden with
the environmental variable RISCV_SUPPLYCHAIN_CONFIG_DIR.

Endpoint settings can also be overridden per call with the environmental
variables RISCV_SUPPLYCHAIN_BASE_URL, RISCV_SUPPLYCHAIN_MODEL and
RISCV_SUPPLYCHAIN_API_KEY. The API key is only ever read from the
environment, never written to the file.
"""

import configparser
import os
from pathlib import Path

import click

from riscv_supplychain.genai.transport import EndpointConfig

CONFIG_FILENAME = "rvsc_config.conf"
CONFIG_DEFAULT_DIR = Path.home() / ".config" / "riscv_supplychain"
CONFIG_DIR_ENV = "RISCV_SUPPLYCHAIN_CONFIG_DIR"

BASE_URL_ENV = "RISCV_SUPPLYCHAIN_BASE_URL"
MODEL_ENV = "RISCV_SUPPLYCHAIN_MODEL"
API_KEY_ENV = "RISCV_SUPPLYCHAIN_API_KEY"

# 2 level dictionary for sections and values:
DEFAULT_TRANSCRIPT_DIR = Path.home() / ".riscv_supplychain" / "transcripts"
TEMPLATE_CONF_DICT = {
    "endpoint": {
        "base_url": "",
        "model_name": "",
        "temperature": 0,
        "timeout": 60,
        "max_retries": 3,
    },
    "default_dirs": {
        "transcript_dir": DEFAULT_TRANSCRIPT_DIR,
    },
}


def get_config_path():
    """Config file location, honouring RISCV_SUPPLYCHAIN_CONFIG_DIR."""
    config_dir = Path(os.environ.get(CONFIG_DIR_ENV, CONFIG_DEFAULT_DIR))
    return config_dir / CONFIG_FILENAME


def write_default_config(path=None, template=None):
    """Write configuration file at first usage. In this way, we don't
    need to keep a confusing template config file in the repo.

    Parameters
    ----------
    path : Path object
        Path of the config file (optional).
    template : dict
        Template of the config file to be written (optional).
    """
    if path is None:
        path = get_config_path()
    if template is None:
        template = TEMPLATE_CONF_DICT

    conf = configparser.ConfigParser()
    for k, val in template.items():
        conf[k] = {key: str(v) for key, v in val.items()}

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        conf.write(f)


def read_config(path=None):
    """Read the configuration, writing the default one if none exists.

    Parameters
    ----------
    path : Path object
        Path of the config file (optional).

    Returns
    -------
    ConfigParser object
    """
    if path is None:
        path = get_config_path()

    if not path.exists():
        write_default_config(path)

    conf = configparser.ConfigParser()
    conf.read(path)

    return conf


def write_config_value(key, val, path=None):
    """Write a new value in the config file. To make things simple, ignore
    sections and look directly for matching parameters names.

    Parameters
    ----------
    key : str
        Name of the parameter to configure.
    val :
        New value.
    path : Path object
        Path of the config file (optional).

    Raises
    ------
    KeyError
        If no section holds ``key``.
    """
    if path is None:
        path = get_config_path()

    conf = read_config(path)
    found = False
    for sect_name, sect_dict in conf.items():
        if key in sect_dict.keys():
            conf[sect_name][key] = str(val)
            found = True
    if not found:
        raise KeyError(f"Unknown configuration key {key}")

    with open(path, "w") as f:
        conf.write(f)


def get_transcript_dir(path=None):
    """Return the directory transcripts are appended to.

    Returns
    -------
    Path object
    """
    conf = read_config(path)
    return Path(conf["default_dirs"]["transcript_dir"])


def get_endpoint_config(path=None, **overrides):
    """Endpoint settings from the config file, the environment and
    explicit overrides, in increasing order of precedence.

    Parameters
    ----------
    path : Path object
        Path of the config file (optional).
    **overrides
        EndpointConfig fields; None values are ignored.

    Returns
    -------
    EndpointConfig

    Raises
    ------
    ValueError
        If no endpoint URL is configured anywhere.
    """
    section = read_config(path)["endpoint"]
    settings = {
        "base_url": os.environ.get(BASE_URL_ENV) or section.get("base_url"),
        "model_name": os.environ.get(MODEL_ENV)
        or section.get("model_name", ""),
        "api_key": os.environ.get(API_KEY_ENV, ""),
        "temperature": section.getfloat("temperature", 0.0),
        "timeout": section.getfloat("timeout", 60.0),
        "max_retries": section.getint("max_retries", 3),
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    if not settings["base_url"]:
        raise ValueError(
            f"No endpoint configured. Set {BASE_URL_ENV} or run "
            "'riscv-supplychain config -k base_url -v <url>'"
        )
    return EndpointConfig(**settings)


def cli_modify_config(key=None, value=None, show=False):
    if not show:
        if key == "api_key":
            click.echo(
                f"The API key is not stored in the config file; set "
                f"{API_KEY_ENV} instead."
            )
            return
        if key[-3:] == "dir":
            path = Path(value)
            if not path.parent.exists():
                click.echo(
                    f"{value} is not a valid path. Path must be "
                    "a valid path string, and its parent must exist!"
                )
                return
        write_config_value(key, value)

    click.echo(_print_config())


def _print_config():
    """Print configuration."""
    config = read_config()
    string = ""
    for sect_name, sect_content in config.items():
        string += f"[{sect_name}]\n"
        for k, val in sect_content.items():
            string += f"\t{k}: {val}\n"

    return string

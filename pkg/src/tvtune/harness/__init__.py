"""Configuration, CSV output and the command-line front end."""
from .cli import main
from .config import RunConfig, load_config, parse_config

__all__ = ["RunConfig", "load_config", "main", "parse_config"]

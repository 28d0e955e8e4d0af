"""
Utilities package for thermal geo-localization
"""

from .env import (
    get_env_bool,
    get_env_float,
    get_env_int,
    get_env_json,
    get_env_list,
    get_env_number_list,
    get_env_value,
    load_experiment_config,
)
from .log import setup_logging

__all__ = [
    "get_env_value",
    "get_env_int",
    "get_env_float",
    "get_env_list",
    "get_env_bool",
    "get_env_json",
    "get_env_number_list",
    "load_experiment_config",
    "setup_logging",
]

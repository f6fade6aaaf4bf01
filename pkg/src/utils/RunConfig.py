# *************************************************************************************************************************
#   RunConfig.py
#       Manage the configuration of a StepGuard run, including access to JSON configuration files.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       The module provides an interface for interacting with the run configuration through the RunConfig class.
#
#       Parameters:
#           Parameters are defined in a JSON configuration file validated against config/run_config_schema.json,
#           then overridden by '--set dotted.key=value' entries and finally by command-line arguments.
#
#       Outputs:
#           The RunConfig class provides methods to retrieve and set configuration values, to create or delete
#           configuration keys, to validate run invariants and to hash the effective configuration.
#
#   Design Notes:
#   -.  Keys are addressed with dotted paths ('metrics.recall_target').
#   -.  Every layer is validated against the schema, so an override cannot smuggle in an ill-typed value.
# *************************************************************************************************************************

# ***********************************************
# imports
# ***********************************************

# config.DEFAULTS - default configuration settings
# copy - deep copies so defaults are never mutated
# os – path existence checks
# src.utils.helperFunctions - schema validation, override parsing, hashing

import copy
import os

from config.DEFAULTS import (ALLOWED_AGGREGATORS, ALLOWED_GRANULARITIES,
                             DEFAULT_RUN_CONFIG, DEFAULT_RUN_CONFIG_SCHEMA,
                             UNHASHED_RUN_KEYS)
from src.utils.errors import ConfigError
from src.utils.helperFunctions import (config_hash, load_json_file, logger,
                                       parse_override, validate_config_json)

# Command-line arguments that map onto configuration entries
CLI_KEY_MAP = {
    'traces': 'inputs.traces',
    'sidecar': 'inputs.sidecar',
    'output_dir': 'output_dir',
    'workers': 'workers',
    'labels': 'metrics.labels',
}


# **************************************************************************
# read JSON configuration files for a StepGuard run.
# **************************************************************************

class RunConfig():
    def __init__(self, config_file=None, overrides=None, command_line_args=None):
        self.config_file = config_file
        self.config_data = copy.deepcopy(DEFAULT_RUN_CONFIG)

        if config_file is not None:
            document = load_json_file(config_file)
            validate_config_json(document, DEFAULT_RUN_CONFIG_SCHEMA)
            self._merge(self.config_data, document)
            logger.info(f"Loaded run configuration from {config_file}")

        for override in overrides or []:
            key, value = parse_override(override)
            self.set_param(key, value)

        for arg_name, key in CLI_KEY_MAP.items():
            value = (command_line_args or {}).get(arg_name)
            if value is not None:
                self.set_param(key, value)

        validate_config_json(self.config_data, DEFAULT_RUN_CONFIG_SCHEMA)

    @staticmethod
    def _merge(target, source):
        for key, value in source.items():
            if isinstance(value, dict) and isinstance(target.get(key), dict) and key != 'settings':
                RunConfig._merge(target[key], value)
            else:
                target[key] = copy.deepcopy(value)

    def get(self, key, default=None):
        """
        Get the value for the specified dotted key.
        """
        node = self.config_data
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set_param(self, key, value):
        """
        Set the value for the specified dotted key; intermediate sections must exist.

        :param key: The name of the key in the format 'parent.child' or 'key' if it has no parent.
        :param value: The new value to assign to the key.
        :return: True if the key's value was successfully updated.
        """
        parts = key.split(".")
        node = self.config_data
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError("unknown configuration section", field_path=key)
            node = node[part]
        node[parts[-1]] = copy.deepcopy(value)
        logger.debug(f'Set value of key "{key}" to: {value}')
        return True

    def create_key(self, key, value):
        return self.set_param(key, value)

    def delete_key(self, key):
        parts = key.split(".")
        node = self.get(".".join(parts[:-1])) if len(parts) > 1 else self.config_data
        if not isinstance(node, dict) or parts[-1] not in node:
            return False
        del node[parts[-1]]
        return True

    def get_all(self):
        """
        Get a deep copy of the effective configuration.
        """
        return copy.deepcopy(self.config_data)

    def config_hash(self):
        hashed = {k: v for k, v in self.config_data.items() if k not in UNHASHED_RUN_KEYS}
        return config_hash(hashed)

    def validate(self, require_scorers=True, check_paths=True):
        """
        Check the run invariants the schema cannot express.
        """
        if check_paths:
            for index, path in enumerate(self.get('inputs.traces') or []):
                if not os.path.exists(path):
                    raise ConfigError(f"input path does not exist: {path}", field_path=f"inputs.traces.{index}")
            sidecar = self.get('inputs.sidecar')
            if sidecar is not None and not os.path.isfile(sidecar):
                raise ConfigError(f"sidecar does not exist: {sidecar}", field_path="inputs.sidecar")
        if require_scorers and not self.get('scorers'):
            raise ConfigError("at least one scorer must be selected", field_path="scorers")
        granularities = self.get('granularities') or []
        if not granularities:
            raise ConfigError("at least one granularity must be selected", field_path="granularities")
        for index, granularity in enumerate(granularities):
            if granularity not in ALLOWED_GRANULARITIES:
                raise ConfigError(f"unknown granularity '{granularity}'", field_path=f"granularities.{index}")
        if self.get('aggregator') not in ALLOWED_AGGREGATORS:
            raise ConfigError(f"unknown aggregator '{self.get('aggregator')}'", field_path="aggregator")
        return True

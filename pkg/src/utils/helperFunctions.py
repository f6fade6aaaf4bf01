# *************************************************************************************************************************
#   helperFunctions.py
#       Provide command-line parsing for the StepGuard toolkit.
#       Validate JSON configuration documents against the schemas shipped under config/ using jsonschema.
#       Hash configurations and input files for run manifests.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       Call parse_command_line_args() to parse and retrieve command-line arguments.
#       Use validate_config_json(document, schema_file) to validate a configuration against a JSON schema.
#
#       Outputs:
#           Command-line parsing results in a dictionary of parsed arguments.
#           Schema validation raises ConfigError naming the offending field path.
#
#   Design Notes:
#   -.  Defaults for parameters with unspecified defaults are managed in the modules that use these parameters.
#   -.  Hashes use canonical JSON (sorted keys, compact separators) so equal configurations hash equally.
# *************************************************************************************************************************

# ***********************************************
# imports
# ***********************************************

# argparse - command-line parsing library
#    ArgumentParser - class to parse command-line options
# hashlib - sha256 digests for manifests
# json - canonical encoding of configurations
# jsonschema - JSON schema validation
#    Draft7Validator - validator yielding every error with its path
# logging - logging library
#    getLogger - function to get a logging instance

import argparse
import hashlib
import json
import logging

from jsonschema import Draft7Validator

from config.DEFAULTS import ALLOWED_LABEL_SOURCES
from src.utils.errors import ConfigError

# ***********************************************
#  auxiliary functions
# ***********************************************


def err_to_str(e): return '' if str(e) is None else str(e)
logger = logging.getLogger(__name__)

# ***********************************************
#  helper functions proper
# ***********************************************

# =========================================================================================
#    Parse command line arguments and return the parsed arguments.
#   Returns:
#    - Parsed command line arguments as a dictionary keyed by the add_argument 'dest' parameters
#
#   Design notes:
#   -.  Every subcommand accepts --config and repeated --set overrides
#   -.  Subcommand-specific paths override the matching configuration entries
# =========================================================================================

SUBCOMMANDS = ["synth", "score", "evaluate", "prepare-train", "train-probe", "report"]


def build_argument_parser():
    parser = argparse.ArgumentParser(
        prog="stepguard",
        description="Score multi-step LLM interaction traces and evaluate failure detection.")
    parser.add_argument("-lf", "--logfile", help="The file used to log application output ('none' disables it)", dest="logfile")
    parser.add_argument("-ll", "--log_level", help="Console log level", dest="log_level")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_common(sub):
        sub.add_argument("-cf", "--config", help="JSON run configuration file", dest="config")
        sub.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                         help="Override a configuration entry (dotted key, JSON value)", dest="overrides")
        sub.add_argument("-od", "--output_dir", help="The directory to store outputs", dest="output_dir")

    synth = subparsers.add_parser("synth", help="Generate synthetic traces with planted errors")
    add_common(synth)
    synth.add_argument("synth_config", nargs="?", help="JSON synth configuration file")

    score = subparsers.add_parser("score", help="Score traces with the configured scorers")
    add_common(score)
    score.add_argument("-tr", "--traces", nargs="+", help="Trace files or directories", dest="traces")
    score.add_argument("-sc", "--sidecar", help="Logits sidecar file", dest="sidecar")
    score.add_argument("-w", "--workers", type=int, help="Worker count", dest="workers")

    evaluate = subparsers.add_parser("evaluate", help="Evaluate scored files against trace labels")
    add_common(evaluate)
    evaluate.add_argument("scored", nargs="*", help="Scored JSONL files (default: every scored file in output_dir)")
    evaluate.add_argument("-tr", "--traces", nargs="+", help="Labelled trace files or directories", dest="traces")
    evaluate.add_argument("-lb", "--labels", choices=ALLOWED_LABEL_SOURCES, help="Label source", dest="labels")

    prepare = subparsers.add_parser("prepare-train", help="Build a teacher-forced training set")
    add_common(prepare)
    prepare.add_argument("-tr", "--traces", nargs="+", help="Trace files or directories", dest="traces")

    train = subparsers.add_parser("train-probe", help="Train the activations probe on trace hidden states")
    add_common(train)
    train.add_argument("-tr", "--traces", nargs="+", help="Trace files or directories", dest="traces")

    report = subparsers.add_parser("report", help="Render an evaluation report as a table")
    add_common(report)
    report.add_argument("report_path", nargs="?", help="Evaluation report JSON (default: output_dir/report.json)")
    report.add_argument("-fm", "--format", default="github", help="tabulate table format", dest="table_format")

    return parser


def parse_command_line_args(argv=None):
    return vars(build_argument_parser().parse_args(argv))


def parse_override(text):
    """
    Split a KEY=VALUE override; VALUE is decoded as JSON when possible and kept as a string otherwise.
    """
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not of the form KEY=VALUE")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override '{text}' has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def load_json_file(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"configuration file {path} is not valid JSON: {err_to_str(e)}")


def validate_config_json(document, schema_file):
    """
    Validate a decoded JSON document against a JSON schema file.

    Parameters:
    - document: the decoded configuration
    - schema_file: path to the JSON schema

    Raises ConfigError naming the first offending field path.
    """
    with open(schema_file, "r", encoding="utf-8") as handle:
        schema = json.load(handle)

    logger.debug('Validating configuration against %s', schema_file)
    errors = sorted(Draft7Validator(schema).iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        field_path = ".".join(str(part) for part in first.absolute_path) or "<root>"
        raise ConfigError(f"invalid configuration: {first.message}", field_path=field_path)


def canonical_json(value):
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(config_dict):
    return hashlib.sha256(canonical_json(config_dict).encode("utf-8")).hexdigest()


def file_digest(path, chunk_size=1 << 20):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()

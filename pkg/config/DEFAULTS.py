# *************************************************************************************************************************
#   DEFAULTS.py
#       Define default values and settings for the StepGuard failure-detection toolkit, including schema paths,
#       logging configurations, scorer and judge settings, metric targets, probe hyper-parameters and synthetic
#       trace generation.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       These constants should be imported and used by other modules, then overridden as required.
#
#   Design Notes:
#   -.  Default paths are provided for the JSON schemas, prompt templates, output directory and log files.
#   -.  The reference defaults (max_failure aggregation, recall target 0.9, 10 ECE bins) are kept apart from the
#       run defaults so that reports can always carry both views.
#   -.  The datetime module is used to timestamp log files.
# ---------------------------------------------------------------------------------------------------------------------

# ***********************************************
# imports
# ***********************************************

# datetime - module for manipulating dates and times
#    datetime.now - function to get the current date and time
# logging – access logging level definitions (CRITICAL, etc.)
# os – os.path helpers to anchor paths on this directory

from datetime import datetime
import logging
import os

# ***********************************************
# Default values
# ***********************************************

TOOLKIT_NAME = "stepguard"
TOOLKIT_VERSION = "0.3.0"

CONFIG_DIR = os.path.dirname(os.path.abspath(__file__))
DEFAULT_RUN_CONFIG_SCHEMA = os.path.join(CONFIG_DIR, "run_config_schema.json")
DEFAULT_SYNTH_CONFIG_SCHEMA = os.path.join(CONFIG_DIR, "synth_config_schema.json")
DEFAULT_TRACE_SCHEMA = os.path.join(CONFIG_DIR, "trace_schema.json")
DEFAULT_PROMPT_DIR = os.path.join(CONFIG_DIR, "prompts")

DEFAULT_TRACE_FILE_EXTENSIONS = ['.jsonl']
DEFAULT_SIDECAR_SUFFIX = ".logits.bin"
MANIFEST_FILE = "manifest.json"

JUDGE_TOKEN_ENV = "STEPGUARD_JUDGE_TOKEN"

# ===============================================
#  Exit codes
# ===============================================

EXIT_SUCCESS = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_JUDGE = 3

# ===============================================
#  Log record format defaults
#     Log format:
#       color_codes – colorization for log records
#       reset – for absence of color
#       line_format – format for log entries
#       date_format – format for dating
# ===============================================

DEFAULT_LOG_RECORD_FORMAT_CONFIG = {
    'color_codes':  {
        logging.CRITICAL: "\033[1;35m", # bright/bold magenta
        logging.ERROR:    "\033[1;31m", # bright/bold red
        logging.WARNING:  "\033[1;33m", # bright/bold yellow
        logging.INFO:     "\033[0;37m", # white / light gray
        logging.DEBUG:    "\033[1;30m"  # bright/bold black / dark gray
    },
    'reset': "\033[0m",
    'line_format': \
         "%(color_on)s[%(asctime)s.%(msecs)03d] [%(threadName)s] [%(levelname)-8s] [%(filename)s:%(lineno)d] %(message)s%(color_off)s",
    'date_format': "%Y-%m-%d %H:%M:%S"
}

# ===============================================
#  Logging defaults
#     console:
#       output – where to direct console messages
#       log_level – minimum level at which to log console messages
#       colorize – whether to colorize log console messages
#     logfile:
#       path – directory for the log file
#       name – name of file ('none' disables file logging)
#       log_level – minimum level at which to log logfile messages
#       colorize – whether to colorize logfile  messages
# ===============================================

DEFAULT_LOGGING_CONFIG = {
    'console': {
        'output': 'stderr',
        'log_level': "info",
        'colorize': True
    },
    'logfile': {
        'path': "logs",
        'name': datetime.now().strftime('STEPGUARD_%H_%M_%d_%m_%Y.log'),
        'log_level': "debug",
        'colorize': False
    }
}

# ===============================================
#  Scoring and evaluation
#     REFERENCE_DEFAULTS – the configuration every report carries
#     ALLOWED_* – enumerations checked by RunConfig.validate
# ===============================================

SCORER_SELF_CERTAINTY = "self_certainty"
SCORER_VERBALIZED = "verbalized"
SCORER_ACTIVATIONS = "activations"
SCORER_JUDGE = "judge"
PRECOMPUTED_PREFIX = "precomputed:"

GRANULARITY_RESPONSE = "response"
GRANULARITY_STEP = "step"
ALLOWED_GRANULARITIES = [GRANULARITY_RESPONSE, GRANULARITY_STEP]

AGGREGATOR_MAX_FAILURE = "max_failure"
ALLOWED_AGGREGATORS = [AGGREGATOR_MAX_FAILURE, "mean", "noisy_or"]

ALLOWED_LABEL_SOURCES = ["response", "answer", "step"]
FLAWED_REASONING_SUBSET = "flawed_reasoning_correct_answer"

REFERENCE_DEFAULTS = {
    'aggregator': AGGREGATOR_MAX_FAILURE,
    'recall_target': 0.9,
    'ece_bins': 10,
}

# ===============================================
#  Judge defaults
#     endpoint – base URL of an OpenAI-compatible server (POST <endpoint>/chat/completions)
#     model – model name sent with each request
#     max_concurrency – bound on in-flight requests
#     retry_limit – retries after the first attempt
#     timeout – per-request timeout in seconds
#     backoff – base of the exponential backoff in seconds
#     template – prompt template id (file stem under config/prompts)
#     scale – 'unit' or 'percent' confidence scale expected in replies
# ===============================================

DEFAULT_JUDGE_CONFIG = {
    'endpoint': "http://localhost:8000/v1",
    'model': "gpt-4.1-mini",
    'max_concurrency': 4,
    'retry_limit': 2,
    'timeout': 60.0,
    'backoff': 1.0,
    'template': "judge_v1",
    'label_template': "label_v1",
    'scale': "unit",
}

# ===============================================
#  Probe defaults
#     hidden_dims – widths of the four hidden layers (5 weight layers in total)
#     learning_rate, batch_size, epochs, seed, validation_fraction, patience – training loop controls
# ===============================================

DEFAULT_PROBE_HIDDEN_DIMS = [256, 128, 64, 32]
DEFAULT_PROBE_TRAIN_CONFIG = {
    'learning_rate': 1e-3,
    'batch_size': 64,
    'epochs': 100,
    'seed': 0,
    'validation_fraction': 0.2,
    'patience': 10,
}

# ===============================================
#  Synthetic generator defaults
# ===============================================

DEFAULT_SYNTH_CONFIG = {
    'seed': 7,
    'trace_count': 1000,
    'steps': {'fixed': 8},
    'error_rate': 0.1,
    'score_model': {
        'correct': {'beta': [2.0, 8.0]},
        'incorrect': {'beta': [8.0, 2.0]},
    },
    'hidden_state_model': {'dimension': 8, 'mean': 2.0, 'sigma': 1.0},
    'vocab_size': 32,
    'logit_scale': {'correct': 6.0, 'incorrect': 1.0},
    'shard': 0,
}
MONTE_CARLO_DRAWS = 1_000_000

# ===============================================
#  Run defaults
#     inputs – trace files/directories and the logits sidecar
#     scorers – list of {name, settings}
#     granularities, aggregator, failure_fraction, workers – scoring controls
#     metrics – recall_target, ece_bins, labels (response | answer | step)
#     output_dir – where scored files, reports and manifests are written
# ===============================================

DEFAULT_RUN_CONFIG = {
    'inputs': {
        'traces': [],
        'sidecar': None,
    },
    'scorers': [],
    'granularities': [GRANULARITY_STEP, GRANULARITY_RESPONSE],
    'aggregator': AGGREGATOR_MAX_FAILURE,
    'failure_fraction': 0.0,
    'workers': os.cpu_count() or 1,
    'metrics': {
        'recall_target': REFERENCE_DEFAULTS['recall_target'],
        'ece_bins': REFERENCE_DEFAULTS['ece_bins'],
        'labels': "response",
    },
    'judge': dict(DEFAULT_JUDGE_CONFIG),
    'probe': dict(DEFAULT_PROBE_TRAIN_CONFIG, hidden_dims=list(DEFAULT_PROBE_HIDDEN_DIMS)),
    'output_dir': "./runs/",
    'seed': 0,
    'logging': {},
}

# Execution settings left out of the configuration hash: they never change results
UNHASHED_RUN_KEYS = ('workers', 'logging')

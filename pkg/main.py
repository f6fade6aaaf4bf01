# *************************************************************************************************************************
#   main.py
#     Entry point for the StepGuard failure-detection toolkit for multi-step LLM interactions.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#      python main.py [-lf LOGFILE] [-ll LEVEL] <command> [-cf CONFIG] [-s KEY=VALUE ...] [-od DIR] [command args]
#      Commands:
#         synth [synth_config.json]                  : generate synthetic traces with planted step errors
#         score -tr TRACES [-sc SIDECAR] [-w N]       : score traces with the configured scorers and granularities
#         evaluate [scored.jsonl ...] -tr TRACES [-lb response|answer|step]
#                                                    : AUC, FPR@recall, ECE and subset recall per scored file
#         prepare-train -tr TRACES                   : teacher-forced training set (gold histories)
#         train-probe -tr TRACES                     : train the activations probe on step hidden states
#         report [report.json] [-fm FORMAT]          : print an evaluation report as a table
#      Common arguments:
#         -cf, --config [path] : JSON run configuration (validated against config/run_config_schema.json)
#         -s, --set KEY=VALUE  : override a configuration entry, e.g. -s metrics.recall_target=0.8
#         -od, --output_dir    : directory for outputs and the run manifest. Defaults to './runs/'
#         -lf, --logfile       : name of the log file ('none' disables file logging)
#      Environment:
#         STEPGUARD_JUDGE_TOKEN : bearer token for the judge endpoint (a .env file is honoured)
#      Exit codes:
#         0 success, 1 usage/configuration error, 2 data/scorer error, 3 judge endpoint error
# *************************************************************************************************************************

# ***********************************************
# imports
# ***********************************************

# sys –
#   exit – exit, returning a final status code
# dotenv -
#   load_dotenv – read STEPGUARD_JUDGE_TOKEN and friends from a .env file

import sys

from dotenv import load_dotenv

# src.cli.Commands - the subcommands and their exit-code mapping
#   run_command - configure, set up logging, dispatch one subcommand
# src.utils.helperFunctions - command-line parsing

from config.DEFAULTS import EXIT_SUCCESS, EXIT_USAGE
from src.cli.Commands import run_command
from src.utils.helperFunctions import parse_command_line_args


# ***********************************************
# program main
# ***********************************************

def main(argv=None):
    load_dotenv()
    try:
        args = parse_command_line_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help and 2 for usage errors
        return EXIT_SUCCESS if not e.code else EXIT_USAGE
    return run_command(args)


def cli():
    sys.exit(main())


if __name__ == '__main__':
    cli()

# *************************************************************************************************************************
#   StepGuardLogWrapper.py
#       This module defines a wrapper for the Python logging module, providing a convenient setup for console and
#       file logging with optional colorized output. It is configurable via the run configuration's 'logging'
#       section and falls back on DEFAULT_LOGGING_CONFIG.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       The StepGuardLogWrapper class is used to configure and initialize logging with predefined settings. It
#       supports customization of console and file log levels, output destinations, and whether to use color.
#
#       Parameters:
#           logging_settings - a dictionary with any of console_log_output, console_log_level, console_colorize,
#                              logfile_path, logfile_file, logfile_log_level, logfile_colorize, line_format,
#                              date_format
#
#       Outputs:
#           Logging output to console and/or to a specified log file, with an optional colorized format.
#
#   Design Notes:
#   -.  LogRecordFormatter is a custom formatter class that extends logging.Formatter to add color support.
#   -.  Failures are reported on stderr, never through the logger being configured.
#   -.  A logfile name of 'none' disables the file handler.
# *************************************************************************************************************************

# ***********************************************
# imports
# ***********************************************

# config.DEFAULTS - module containing default configuration values for the logging setup
#    DEFAULT_LOGGING_CONFIG - a dictionary containing the default logging configuration settings
# logging - provides a flexible framework for emitting log messages from Python programs
# os - path joining and log directory creation
# sys - sys.stdout, sys.stderr streams

import logging
import os
import sys

from config.DEFAULTS import (DEFAULT_LOG_RECORD_FORMAT_CONFIG,
                             DEFAULT_LOGGING_CONFIG)
from .helperFunctions import err_to_str

# ***************************************************************************************************************************
# LogRecordFormatter:  Set up object for controlling the appearance of log records
#
#    Methods:
#     __init__():  set up parameters for formatting the log
#         Parameters:
#            color – determine whether to colorize log records
#       format(): format a log record, adding color_on / color_off attributes
# ***************************************************************************************************************************


class LogRecordFormatter(logging.Formatter):

    @staticmethod
    def line_format(): return DEFAULT_LOG_RECORD_FORMAT_CONFIG['line_format']

    @staticmethod
    def date_format(): return DEFAULT_LOG_RECORD_FORMAT_CONFIG['date_format']

    def __init__(self, color, *args, **kwargs):
        super(LogRecordFormatter, self).__init__(*args, **kwargs)
        self.color = color
        self.colorCodes = DEFAULT_LOG_RECORD_FORMAT_CONFIG['color_codes']
        self.resetCode = DEFAULT_LOG_RECORD_FORMAT_CONFIG['reset']

    def format(self, record, *args, **kwargs):
        record.color_on, record.color_off = "", ""
        if (self.color and record.levelno in self.colorCodes):
            record.color_on = self.colorCodes[record.levelno]
            record.color_off = self.resetCode
        return super(LogRecordFormatter, self).format(record, *args, **kwargs)

# ***************************************************************************************************************************
# StepGuardLogWrapper:  wrap the logging module, providing methods to set up logging
#
#    Methods:
#     __init__():  resolve every logging parameter against DEFAULT_LOGGING_CONFIG
#     set_up_logging():  attach console and logfile handlers to the root logger; False on failure
# ***************************************************************************************************************************


class StepGuardLogWrapper(object):

    def __init__(self, logging_settings=None):
        settings = dict(logging_settings or {})

        self.console_log_output = settings.get('console_log_output', DEFAULT_LOGGING_CONFIG['console']['output'])
        self.console_log_level = settings.get('console_log_level', DEFAULT_LOGGING_CONFIG['console']['log_level'])
        self.console_colorize = settings.get('console_colorize', DEFAULT_LOGGING_CONFIG['console']['colorize'])
        self.logfile_path = settings.get('logfile_path', DEFAULT_LOGGING_CONFIG['logfile']['path'])
        self.logfile_file = settings.get('logfile_file', DEFAULT_LOGGING_CONFIG['logfile']['name'])
        self.logfile_log_level = settings.get('logfile_log_level', DEFAULT_LOGGING_CONFIG['logfile']['log_level'])
        self.logfile_colorize = settings.get('logfile_colorize', DEFAULT_LOGGING_CONFIG['logfile']['colorize'])

        # Log record formatting parameters
        self.line_format = settings.get('line_format', LogRecordFormatter.line_format())
        self.date_format = settings.get('date_format', LogRecordFormatter.date_format())

        self.handlers = []

    def set_up_logging(self):

        # The root logger is configured so that module loggers propagate to it.
        logger = logging.getLogger()

        # Set global log level to 'debug' (required for handler levels to work)
        logger.setLevel(logging.DEBUG)

        console_log_output = str(self.console_log_output).lower()
        if (console_log_output == "stdout"):
            stream = sys.stdout
        elif (console_log_output == "stderr"):
            stream = sys.stderr
        else:
            print(f"Failed to set console output: invalid output: '{self.console_log_output}'", file=sys.stderr)
            return False

        console_handler = logging.StreamHandler(stream)
        try:
            # only accepts uppercase level names
            console_handler.setLevel(str(self.console_log_level).upper())
        except Exception as exception:
            print(
                f"Failed to set console log level. Invalid level: {self.console_log_level}  \n Error: {err_to_str(exception)}",  file=sys.stderr)
            return False

        console_handler.setFormatter(LogRecordFormatter(
            fmt=self.line_format, color=self.console_colorize, datefmt=self.date_format))

        logfile_handler = None
        if str(self.logfile_file).lower() != "none":
            try:
                if self.logfile_path:
                    os.makedirs(self.logfile_path, exist_ok=True)
                logfile_handler = logging.FileHandler(
                    os.path.join(self.logfile_path, self.logfile_file), encoding="utf-8")
            except Exception as exception:
                print(f"Failed to set up log file: {err_to_str(exception)}",  file=sys.stderr)
                return False

            try:
                logfile_handler.setLevel(str(self.logfile_log_level).upper())
            except Exception as exception:
                print(f"Failed to set up log file log level: {err_to_str(exception)}",  file=sys.stderr)
                logfile_handler.close()
                return False

            logfile_handler.setFormatter(LogRecordFormatter(
                fmt=self.line_format, color=self.logfile_colorize, datefmt=self.date_format))

        logger.addHandler(console_handler)
        self.handlers.append(console_handler)
        if logfile_handler is not None:
            logger.addHandler(logfile_handler)
            self.handlers.append(logfile_handler)

        return True

    def tear_down_logging(self):
        logger = logging.getLogger()
        for handler in self.handlers:
            logger.removeHandler(handler)
            handler.close()
        self.handlers = []

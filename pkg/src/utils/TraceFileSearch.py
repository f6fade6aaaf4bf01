# *************************************************************************************************************************
#   TraceFileSearch.py
#       This module provides the TraceFileSearch class, which resolves trace inputs (files or directories) into the
#       ordered list of trace files a run reads.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       TraceFileSearch(path).traverse_directory() lists every trace file below a directory;
#       resolve_trace_paths(paths) expands a mix of files and directories.
#
#   Design Notes:
#   -.  Results are sorted so that the load order, and therefore every artifact, is independent of the file system.
#   -.  Missing paths are logged and skipped by traverse_directory; resolve_trace_paths raises instead.
# *************************************************************************************************************************

# ***********************************************
# imports
# ***********************************************

# logging - module to provide logging functionalities
# os - os.walk / os.path for directory traversal

import logging
import os

from config.DEFAULTS import DEFAULT_TRACE_FILE_EXTENSIONS
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)


class TraceFileSearch:
    def __init__(self, path, file_exts=None):
        self.path = path
        self.file_exts = tuple(ext.lower() for ext in (file_exts or DEFAULT_TRACE_FILE_EXTENSIONS))

    def traverse_directory(self):
        """
        Recursively traverses the directory and returns the sorted paths of every trace file below it.
        """
        if not os.path.exists(self.path):
            logger.error("Directory does not exist: %s", self.path)
            return []

        file_paths = []
        for dirpath, dirnames, filenames in os.walk(self.path, onerror=lambda e: logger.error(e)):
            for filename in filenames:
                if filename.lower().endswith(self.file_exts):
                    file_paths.append(os.path.join(dirpath, filename))
        return sorted(file_paths)

    def get_file_properties(self, file_path):
        """
        Returns a dictionary of properties for the file at the specified path.
        """
        try:
            file_stats = os.stat(file_path)
            return {
                "file_name": os.path.basename(file_path),
                "file_size": file_stats.st_size,
                "modified_time": file_stats.st_mtime,
            }
        except OSError as e:
            logger.error("Error accessing file properties for %s: %s", file_path, e)
            return None


def resolve_trace_paths(paths):
    resolved = []
    for path in paths:
        if os.path.isdir(path):
            found = TraceFileSearch(path).traverse_directory()
            if not found:
                logger.warning("No trace files found below %s", path)
            resolved.extend(found)
        elif os.path.isfile(path):
            resolved.append(path)
        else:
            raise ConfigError(f"trace input does not exist: {path}", field_path="inputs.traces")
    return resolved

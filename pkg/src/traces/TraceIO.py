# *************************************************************************************************************************
#   TraceIO.py
#       Read and write trace files: JSONL, UTF-8, one InteractionTrace per line, with an optional logits sidecar.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       traces = load_traces("run/traces.jsonl")              # sidecar looked up next to the file when needed
#       save_traces(traces, "out/traces.jsonl")
#       dataset = open_dataset(["run/"], sidecar_path=None)    # several files or directories, a sidecar per file
#
#   Design Notes:
#   -.  Each line is decoded as UTF-8 and checked against config/trace_schema.json with jsonschema; the first error
#       is reported with its line number and field path. No partially-constructed trace is ever returned.
#   -.  The default sidecar of 'x.jsonl' is 'x.logits.bin'.
#   -.  Shards keep their own sidecars: a trace reads its logits through dataset.sidecar_for(trace).
#   -.  Floats are written with repr precision, so load(save(x)) reproduces x bit for bit.
#   -.  Writes go to a temporary file that replaces the target, so readers never see a half-written file.
# *************************************************************************************************************************

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from jsonschema import Draft7Validator

from config.DEFAULTS import DEFAULT_SIDECAR_SUFFIX, DEFAULT_TRACE_SCHEMA
from src.traces.LogitsSidecar import LogitsSidecar, open_sidecar
from src.traces.TraceModel import InteractionTrace, validate_dataset
from src.utils.errors import DanglingReferenceError, TraceFormatError
from src.utils.helperFunctions import err_to_str
from src.utils.TraceFileSearch import resolve_trace_paths

logger = logging.getLogger(__name__)

_validator = None


def _trace_validator():
    global _validator
    if _validator is None:
        with open(DEFAULT_TRACE_SCHEMA, "r", encoding="utf-8") as handle:
            _validator = Draft7Validator(json.load(handle))
    return _validator


def default_sidecar_path(trace_path):
    return os.path.splitext(trace_path)[0] + DEFAULT_SIDECAR_SUFFIX


def parse_trace_line(text, line_number):
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise TraceFormatError(f"malformed JSON: {err_to_str(e)}", line=line_number, field_path="<line>")
    errors = sorted(_trace_validator().iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        field_path = ".".join(str(part) for part in first.absolute_path) or "<root>"
        raise TraceFormatError(first.message, line=line_number, field_path=field_path)
    return InteractionTrace.from_dict(document)


def read_trace_file(path):
    traces = []
    with open(path, "rb") as handle:
        for line_number, raw in enumerate(handle, start=1):
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise TraceFormatError(f"{path}: invalid UTF-8: {err_to_str(e)}", line=line_number, field_path="<line>")
            if not text.strip():
                continue
            traces.append(parse_trace_line(text, line_number))
    return traces


def _resolve_sidecar(traces, trace_path, sidecar):
    if isinstance(sidecar, LogitsSidecar):
        return sidecar
    needs_sidecar = any(step.logits_ref is not None for trace in traces for step in trace.steps)
    sidecar_path = sidecar if sidecar is not None else default_sidecar_path(trace_path)
    if not os.path.isfile(sidecar_path):
        if needs_sidecar:
            first = next(t.id for t in traces if any(s.logits_ref is not None for s in t.steps))
            raise DanglingReferenceError(
                f"trace '{first}' references logits but sidecar {sidecar_path} does not exist")
        return None
    return open_sidecar(sidecar_path)


def load_traces(path, sidecar=None):
    """
    Load every trace of a JSONL file and validate the dataset invariants.

    Parameters:
    - path: trace file
    - sidecar: sidecar path or opened LogitsSidecar (default: the file next to the traces, when one is needed)
    """
    traces = read_trace_file(path)
    view = _resolve_sidecar(traces, path, sidecar)
    validate_dataset(traces, view)
    logger.info("Loaded %d traces from %s", len(traces), path)
    return traces


def save_traces(traces, path):
    validate_dataset(traces)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    temporary = f"{path}.tmp"
    with open(temporary, "w", encoding="utf-8", newline="\n") as handle:
        for trace in traces:
            handle.write(json.dumps(trace.to_dict(), ensure_ascii=False))
            handle.write("\n")
    os.replace(temporary, path)
    logger.info("Wrote %d traces to %s", len(traces), path)


@dataclass
class TraceDataset:
    """
    Traces plus the sidecars their logits references point into.

    'sidecar' serves every trace; 'sidecars_by_trace' overrides it per trace id when the traces came from
    several files, each with its own sidecar.
    """
    traces: List[InteractionTrace]
    sidecar: Optional[LogitsSidecar] = None
    paths: Optional[List[str]] = None
    sidecars_by_trace: Dict[str, LogitsSidecar] = field(default_factory=dict)

    def by_id(self):
        return {trace.id: trace for trace in self.traces}

    def sidecar_for(self, trace):
        return self.sidecars_by_trace.get(trace.id, self.sidecar)

    def open_sidecars(self):
        views = [self.sidecar] if self.sidecar is not None else []
        for view in self.sidecars_by_trace.values():
            if all(view is not seen for seen in views):
                views.append(view)
        return views

    def sidecar_paths(self):
        return sorted({view.path for view in self.open_sidecars()})

    def close(self):
        for view in self.open_sidecars():
            view.close()


def open_dataset(paths, sidecar_path=None):
    """
    Load traces from files and/or directories and validate the union as one dataset.

    Each trace file reads its logits from its own default sidecar; an explicit sidecar_path serves every file.
    """
    files = resolve_trace_paths(paths)
    shared = None
    per_trace = {}
    views = []
    traces = []
    try:
        if sidecar_path is not None and files:
            shared = open_sidecar(sidecar_path)
            views.append(shared)
        for path in files:
            file_traces = read_trace_file(path)
            view = shared if shared is not None else _resolve_sidecar(file_traces, path, None)
            if view is not None and view is not shared:
                views.append(view)
                per_trace.update((trace.id, view) for trace in file_traces)
            # logits bounds are checked against the file's own sidecar
            validate_dataset(file_traces, view)
            traces.extend(file_traces)
        validate_dataset(traces)
    except Exception:
        for view in views:
            view.close()
        raise

    dataset = TraceDataset(traces=traces, sidecar=shared, paths=files, sidecars_by_trace=per_trace)
    if shared is None and len(views) == 1:
        dataset.sidecar, dataset.sidecars_by_trace = views[0], {}
    logger.info("Loaded %d traces from %d file(s) with %d sidecar(s)", len(traces), len(files), len(views))
    return dataset

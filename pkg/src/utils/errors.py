# *************************************************************************************************************************
#   errors.py
#       Exception hierarchy shared by every StepGuard package.
# -------------------------------------------------------------------------------------------------------------------
#   Design Notes:
#   -.  Every toolkit error derives from StepGuardError so main.py can map families of errors to exit codes.
#   -.  DataError covers malformed inputs and scorer failures (exit 2); JudgeError covers the evaluator endpoint
#       (exit 3); ConfigError covers configuration and usage (exit 1).
#   -.  Errors carry the structured attributes (line, field path, trace id, step index ...) that produced them.
# *************************************************************************************************************************


class StepGuardError(Exception):
    pass


class ConfigError(StepGuardError):
    def __init__(self, message, field_path=None):
        self.field_path = field_path
        where = f" at '{field_path}'" if field_path else ""
        super().__init__(f"{message}{where}")


# ***********************************************
#  data errors (exit code 2)
# ***********************************************

class DataError(StepGuardError):
    pass


class TraceFormatError(DataError):
    def __init__(self, message, line=None, field_path=None):
        self.line = line
        self.field_path = field_path
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field_path:
            where.append(f"field '{field_path}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class TraceValidationError(DataError):
    def __init__(self, trace_id, rule, detail=""):
        self.trace_id = trace_id
        self.rule = rule
        super().__init__(f"trace '{trace_id}' violates {rule}" + (f": {detail}" if detail else ""))


class DanglingReferenceError(DataError):
    pass


class SidecarFormatError(DataError):
    pass


class SidecarBoundsError(DataError):
    pass


class ScorerError(DataError):
    def __init__(self, message, trace_id=None, step_index=None):
        self.trace_id = trace_id
        self.step_index = step_index
        where = []
        if trace_id is not None:
            where.append(f"trace '{trace_id}'")
        if step_index is not None:
            where.append(f"step {step_index}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class MissingEvidenceError(ScorerError):
    pass


class MissingScoreError(ScorerError):
    pass


class ScoreRangeError(ScorerError):
    pass


class ParseMissing(DataError):
    def __init__(self, text):
        self.text = text
        preview = text if len(text) <= 80 else text[:77] + "..."
        super().__init__(f"no confidence value found in: {preview!r}")


class AggregationError(DataError):
    pass


class ScoringRunError(DataError):
    def __init__(self, message, failures=None):
        self.failures = failures or {}
        super().__init__(message)


class UndefinedMetric(DataError):
    pass


class OrphanLabelError(DataError):
    def __init__(self, orphans):
        self.orphans = sorted(orphans)
        shown = ", ".join(self.orphans[:10]) + (" ..." if len(self.orphans) > 10 else "")
        super().__init__(f"{len(self.orphans)} scored ids without labelled traces: {shown}")


class ProbeDimensionError(DataError):
    pass


class ProbeFormatError(DataError):
    pass


class ProbeTrainingError(DataError):
    pass


class ProbeDivergenceError(ProbeTrainingError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"probe training diverged at epoch {epoch} (loss={loss})")


# ***********************************************
#  judge errors (exit code 3)
# ***********************************************

class JudgeError(StepGuardError):
    def __init__(self, message, transcript=None):
        self.transcript = transcript
        super().__init__(message)


class JudgeUnavailable(JudgeError):
    pass


class JudgeUnparseable(JudgeError):
    pass


class LabelUnparseable(JudgeError):
    pass

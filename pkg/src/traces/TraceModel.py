# *************************************************************************************************************************
#   TraceModel.py
#       Data model for logged multi-step interactions: an InteractionTrace holds the context and an ordered list of
#       StepRecords (query, agent response, optional gold response, label and per-step evidence).
# -------------------------------------------------------------------------------------------------------------------
#   Design Notes:
#   -.  Labels use 1 = incorrect throughout, the positive class of every detection metric.
#   -.  Hidden states are kept as tuples of Python floats so that equality and JSON round trips are exact.
#   -.  to_dict() omits absent optional fields; from_dict() expects a document already checked against
#       config/trace_schema.json.
# *************************************************************************************************************************

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.utils.errors import ScoreRangeError, TraceValidationError

ORIENTATION_FAILURE = "failure"
ORIENTATION_CONFIDENCE = "confidence"


@dataclass(frozen=True)
class LogitsRef:
    row_offset: int
    row_count: int

    def to_dict(self):
        return {"row_offset": self.row_offset, "row_count": self.row_count}


@dataclass(frozen=True)
class PrecomputedScore:
    value: float
    orientation: str

    def to_dict(self):
        return {"value": self.value, "orientation": self.orientation}

    def failure_score(self):
        """
        Convert to the canonical failure orientation; values must already lie in [0, 1].
        """
        if not (0.0 <= self.value <= 1.0):
            raise ScoreRangeError(f"precomputed value {self.value} outside [0, 1]")
        if self.orientation == ORIENTATION_CONFIDENCE:
            return 1.0 - self.value
        return float(self.value)


@dataclass
class StepRecord:
    query: str
    response: str
    gold_response: Optional[str] = None
    step_label: Optional[int] = None
    logits_ref: Optional[LogitsRef] = None
    hidden_state: Optional[Tuple[float, ...]] = None
    verbalized_text: Optional[str] = None
    precomputed_scores: Dict[str, PrecomputedScore] = field(default_factory=dict)

    def hidden_array(self):
        return None if self.hidden_state is None else np.asarray(self.hidden_state, dtype=np.float64)

    def to_dict(self):
        record = {"query": self.query, "response": self.response}
        if self.gold_response is not None:
            record["gold_response"] = self.gold_response
        if self.step_label is not None:
            record["step_label"] = self.step_label
        if self.logits_ref is not None:
            record["logits_ref"] = self.logits_ref.to_dict()
        if self.hidden_state is not None:
            record["hidden_state"] = list(self.hidden_state)
        if self.verbalized_text is not None:
            record["verbalized_text"] = self.verbalized_text
        if self.precomputed_scores:
            record["precomputed_scores"] = {name: score.to_dict()
                                            for name, score in sorted(self.precomputed_scores.items())}
        return record

    @classmethod
    def from_dict(cls, record):
        logits_ref = record.get("logits_ref")
        hidden_state = record.get("hidden_state")
        scores = record.get("precomputed_scores") or {}
        return cls(
            query=record["query"],
            response=record["response"],
            gold_response=record.get("gold_response"),
            step_label=None if record.get("step_label") is None else int(record["step_label"]),
            logits_ref=None if logits_ref is None else LogitsRef(int(logits_ref["row_offset"]), int(logits_ref["row_count"])),
            hidden_state=None if hidden_state is None else tuple(float(v) for v in hidden_state),
            verbalized_text=record.get("verbalized_text"),
            precomputed_scores={name: PrecomputedScore(float(entry["value"]), entry["orientation"])
                                for name, entry in scores.items()},
        )


@dataclass
class InteractionTrace:
    id: str
    context: str
    steps: List[StepRecord]
    response_label: Optional[int] = None
    answer_label: Optional[int] = None

    @property
    def n(self):
        return len(self.steps)

    def step(self, index):
        """
        Return the step with 1-based index.
        """
        return self.steps[index - 1]

    def derived_response_label(self):
        """
        max over step labels when every step is labelled, None otherwise.
        """
        labels = [s.step_label for s in self.steps]
        if not labels or any(label is None for label in labels):
            return None
        return max(labels)

    def to_dict(self):
        record = {"id": self.id, "context": self.context, "steps": [s.to_dict() for s in self.steps]}
        if self.response_label is not None:
            record["response_label"] = self.response_label
        if self.answer_label is not None:
            record["answer_label"] = self.answer_label
        return record

    @classmethod
    def from_dict(cls, record):
        return cls(
            id=record["id"],
            context=record["context"],
            steps=[StepRecord.from_dict(s) for s in record["steps"]],
            response_label=None if record.get("response_label") is None else int(record["response_label"]),
            answer_label=None if record.get("answer_label") is None else int(record["answer_label"]),
        )


# ***********************************************
#  invariants
# ***********************************************

def validate_trace(trace):
    """
    Check the per-trace invariants; raises TraceValidationError naming the rule.
    """
    if trace.n < 1:
        raise TraceValidationError(trace.id, "n >= 1", "trace has no steps")
    for name in ("response_label", "answer_label"):
        value = getattr(trace, name)
        if value is not None and value not in (0, 1):
            raise TraceValidationError(trace.id, f"{name} in {{0, 1}}", f"got {value}")
    for index, step in enumerate(trace.steps, start=1):
        if step.step_label is not None and step.step_label not in (0, 1):
            raise TraceValidationError(trace.id, "step_label in {0, 1}", f"step {index} has {step.step_label}")
        if step.logits_ref is not None and step.logits_ref.row_count < 1:
            raise TraceValidationError(trace.id, "logits_ref addresses >= 1 row", f"step {index}")
        if step.hidden_state is not None and not np.all(np.isfinite(step.hidden_state)):
            raise TraceValidationError(trace.id, "hidden_state finite", f"step {index}")
    derived = trace.derived_response_label()
    if derived is not None and trace.response_label is not None and derived != trace.response_label:
        raise TraceValidationError(
            trace.id, "response_label = max(step_label)",
            f"step labels give {derived} but response_label is {trace.response_label}")


def validate_dataset(traces, sidecar=None):
    """
    Check the dataset-wide invariants: unique ids, one hidden-state dimensionality, logits references in bounds.
    """
    seen = set()
    hidden_dim = None
    for trace in traces:
        validate_trace(trace)
        if trace.id in seen:
            raise TraceValidationError(trace.id, "unique trace id")
        seen.add(trace.id)
        for index, step in enumerate(trace.steps, start=1):
            if step.hidden_state is not None:
                if hidden_dim is None:
                    hidden_dim = len(step.hidden_state)
                elif len(step.hidden_state) != hidden_dim:
                    raise TraceValidationError(
                        trace.id, "uniform hidden_state dimensionality",
                        f"step {index} has {len(step.hidden_state)}, dataset has {hidden_dim}")
            if step.logits_ref is not None and sidecar is not None:
                end = step.logits_ref.row_offset + step.logits_ref.row_count
                if end > sidecar.row_count:
                    raise TraceValidationError(
                        trace.id, "logits_ref within sidecar bounds",
                        f"step {index} addresses rows up to {end}, sidecar holds {sidecar.row_count}")
    return hidden_dim

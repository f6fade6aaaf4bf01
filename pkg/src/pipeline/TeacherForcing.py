# *************************************************************************************************************************
#   TeacherForcing.py
#       Build teacher-forced training examples: step i is shown with the gold responses of steps 1..i-1, never the
#       agent's own earlier responses, and labelled 1 when the agent's response differs from the gold one.
# -------------------------------------------------------------------------------------------------------------------
#   Design Notes:
#   -.  A stored step_label wins; otherwise responses are compared after whitespace collapsing and lowercasing.
#       An LLM labeller is available through label_trace_steps but is never invoked here.
#   -.  A trace with any step lacking gold_response is skipped with a warning and counted.
# *************************************************************************************************************************

import json
import logging
import os
from dataclasses import asdict, dataclass
from typing import List

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingExample:
    trace_id: str
    step_index: int
    context: str
    queries: List[str]
    gold_history: List[str]
    response: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if len(self.gold_history) != self.step_index - 1 or len(self.queries) != self.step_index:
            raise ValueError("history length must be step_index - 1")

    def to_dict(self):
        return asdict(self)


def normalize_response(text):
    return " ".join((text or "").split()).lower()


def step_differs(step):
    if step.step_label is not None:
        return int(step.step_label)
    return int(normalize_response(step.response) != normalize_response(step.gold_response))


def build_teacher_forced_detailed(traces):
    """
    Returns (examples, ids of skipped traces).
    """
    examples, skipped = [], []
    for trace in traces:
        missing = [i for i, s in enumerate(trace.steps, start=1) if s.gold_response is None]
        if missing:
            logger.warning("Skipping trace %s: no gold_response at step %d", trace.id, missing[0])
            skipped.append(trace.id)
            continue
        gold = [s.gold_response for s in trace.steps]
        queries = [s.query for s in trace.steps]
        for index, step in enumerate(trace.steps, start=1):
            examples.append(TrainingExample(
                trace_id=trace.id, step_index=index, context=trace.context,
                queries=queries[:index], gold_history=gold[:index - 1],
                response=step.response, label=step_differs(step)))
    logger.info("Built %d teacher-forced examples (%d traces skipped)", len(examples), len(skipped))
    return examples, skipped


def build_teacher_forced(traces):
    examples, _ = build_teacher_forced_detailed(traces)
    return examples


def save_training_set(examples, path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for example in examples:
            handle.write(json.dumps(example.to_dict(), ensure_ascii=False))
            handle.write("\n")
    return path


def load_training_set(path):
    with open(path, "r", encoding="utf-8") as handle:
        return [TrainingExample(**json.loads(line)) for line in handle if line.strip()]

# *************************************************************************************************************************
#   ScoringPipeline.py
#       Run a scorer over a dataset at one granularity, aggregate step scores into interaction-level failure scores and
#       apply flagging thresholds.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       scorer = ScorerFactory.load_class("precomputed:planted")
#       scored = score_dataset(dataset, scorer, "step", aggregator="max_failure")
#       flagged = [flag(s, 0.5) for s in scored]
#       save_scored(scored, "runs/scored_precomputed_planted_step.jsonl")
#
#   Design Notes:
#   -.  Scores are failure scores; max_failure over steps flags an interaction exactly when some step reaches the
#       threshold, the decision rule of "flag if any step's confidence falls below the threshold".
#   -.  Outputs are sorted by trace id, so worker count and completion order never change an artifact.
#   -.  A run fails when more than failure_fraction of the traces error (default 0: any error fails the run).
# *************************************************************************************************************************

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from config.DEFAULTS import (AGGREGATOR_MAX_FAILURE, ALLOWED_AGGREGATORS,
                             GRANULARITY_RESPONSE, GRANULARITY_STEP)
from src.traces.TraceIO import TraceDataset
from src.utils.errors import (AggregationError, ConfigError, JudgeError,
                              ScoringRunError, TraceFormatError)
from src.utils.helperFunctions import err_to_str

logger = logging.getLogger(__name__)


def aggregate_steps(per_step, aggregator=AGGREGATOR_MAX_FAILURE):
    """
    Combine step failure scores into one interaction failure score.

    Aggregators:
    - max_failure: max_i f_i
    - mean: arithmetic mean
    - noisy_or: 1 - prod_i (1 - f_i)
    """
    scores = [float(f) for f in per_step]
    if not scores:
        raise AggregationError("cannot aggregate an empty list of step scores")
    if aggregator not in ALLOWED_AGGREGATORS:
        raise ConfigError(f"unknown aggregator '{aggregator}'", field_path="aggregator")
    if len(scores) == 1:
        return scores[0]
    if aggregator == AGGREGATOR_MAX_FAILURE:
        return max(scores)
    if aggregator == "mean":
        return math.fsum(scores) / len(scores)
    return float(1.0 - np.prod([1.0 - f for f in scores]))


@dataclass
class ScoredInteraction:
    trace_id: str
    scorer_name: str
    granularity: str
    aggregate: float
    per_step: Optional[List[float]] = None
    aggregator: Optional[str] = None
    threshold: Optional[float] = None
    flagged: Optional[bool] = None
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.granularity == GRANULARITY_STEP and not self.per_step:
            raise ValueError("step-granularity interactions carry per-step scores")
        if self.granularity == GRANULARITY_RESPONSE and self.per_step is not None:
            raise ValueError("response-granularity interactions carry no per-step scores")

    @classmethod
    def from_output(cls, trace_id, output, aggregator):
        if output.granularity == GRANULARITY_STEP:
            return cls(trace_id, output.scorer_name, output.granularity,
                       aggregate=aggregate_steps(output.per_step, aggregator), per_step=list(output.per_step),
                       aggregator=aggregator, diagnostics=dict(output.diagnostics))
        return cls(trace_id, output.scorer_name, output.granularity, aggregate=output.whole,
                   diagnostics=dict(output.diagnostics))

    def to_dict(self):
        record = {"trace_id": self.trace_id, "scorer_name": self.scorer_name, "granularity": self.granularity}
        if self.per_step is not None:
            record["per_step"] = self.per_step
            record["aggregator"] = self.aggregator
        record["aggregate"] = self.aggregate
        if self.threshold is not None:
            record["threshold"] = self.threshold
            record["flagged"] = self.flagged
        if self.diagnostics:
            record["diagnostics"] = self.diagnostics
        return record

    @classmethod
    def from_dict(cls, record):
        return cls(trace_id=record["trace_id"], scorer_name=record["scorer_name"],
                   granularity=record["granularity"], aggregate=float(record["aggregate"]),
                   per_step=None if record.get("per_step") is None else [float(f) for f in record["per_step"]],
                   aggregator=record.get("aggregator"), threshold=record.get("threshold"),
                   flagged=record.get("flagged"), diagnostics=record.get("diagnostics") or {})


def flag(scored, threshold):
    """
    True iff the aggregate failure score reaches the threshold.
    """
    return scored.aggregate >= threshold


def apply_threshold(scored, threshold):
    for item in scored:
        item.threshold = float(threshold)
        item.flagged = flag(item, threshold)
    return scored


def run_scorer(traces, scorer, granularity, aggregator=AGGREGATOR_MAX_FAILURE, failure_fraction=0.0, workers=1):
    """
    Score every trace; returns (scored interactions sorted by id, {trace id: tolerated error}).
    """
    dataset = traces if isinstance(traces, TraceDataset) else TraceDataset(traces=list(traces))
    ordered = sorted(dataset.traces, key=lambda t: t.id)
    scorer.check_granularity(granularity)
    scorer.prepare(dataset, granularity)
    results = scorer.score_traces(ordered, granularity, workers=workers)

    scored, errors = [], {}
    for trace in ordered:
        outcome = results[trace.id]
        if isinstance(outcome, Exception):
            errors[trace.id] = outcome
        else:
            scored.append(ScoredInteraction.from_output(trace.id, outcome, aggregator))

    if errors:
        first_id = sorted(errors)[0]
        for trace_id in sorted(errors):
            logger.warning("Scorer %s failed on trace %s: %s", scorer.name, trace_id, err_to_str(errors[trace_id]))
        if len(errors) > failure_fraction * len(ordered):
            judge_errors = [errors[i] for i in sorted(errors) if isinstance(errors[i], JudgeError)]
            if judge_errors:
                raise judge_errors[0]
            raise ScoringRunError(
                f"scorer {scorer.name} failed on {len(errors)} of {len(ordered)} traces "
                f"(first: '{first_id}': {err_to_str(errors[first_id])})", failures=errors)
    logger.info("Scored %d traces with %s at %s granularity (%d tolerated errors)",
                len(scored), scorer.name, granularity, len(errors))
    return scored, errors


def score_dataset(traces, scorer, granularity, aggregator=AGGREGATOR_MAX_FAILURE, failure_fraction=0.0, workers=1):
    scored, _ = run_scorer(traces, scorer, granularity, aggregator, failure_fraction, workers)
    return scored


# ***********************************************
#  scored JSONL files
# ***********************************************

def scored_file_name(scorer_name, granularity):
    return f"scored_{scorer_name.replace(':', '_')}_{granularity}.jsonl"


def save_scored(scored, path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for item in sorted(scored, key=lambda s: s.trace_id):
            handle.write(json.dumps(item.to_dict(), ensure_ascii=False))
            handle.write("\n")
    return path


def load_scored(path):
    scored = []
    with open(path, "rb") as handle:
        for line_number, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                scored.append(ScoredInteraction.from_dict(json.loads(raw.decode("utf-8"))))
            except (ValueError, KeyError, TypeError) as e:
                raise TraceFormatError(f"malformed scored record in {path}: {err_to_str(e)}", line=line_number)
    return scored

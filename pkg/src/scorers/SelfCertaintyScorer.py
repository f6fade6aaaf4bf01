# *************************************************************************************************************************
#   SelfCertaintyScorer.py
#       White-box scorer measuring how far the agent's token distributions are from uniform.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       raw = self_certainty_raw(rows)                           # rows: T x V logits
#       outputs, errors = self_certainty_score(dataset, "step")  # failure scores for every trace
#
#   Design Notes:
#   -.  raw = (1/T) * sum_t KL(softmax(row_t) || Uniform(V)) = (1/T) * sum_t [ln V - H(softmax(row_t))],
#       so raw lies in [0, ln V]; higher means more certain.
#   -.  log_softmax subtracts the row maximum, so logits of magnitude 1e4 do not overflow.
#   -.  Certainties are min-max normalised over the whole dataset and flipped into failure scores; a dataset whose
#       raw values are all equal maps every unit to 0.5.
#   -.  Step units are a step's own token rows; the response unit is the concatenation of every step's rows.
# *************************************************************************************************************************

import logging
import math

import numpy as np
from scipy.special import log_softmax

from config.DEFAULTS import (GRANULARITY_RESPONSE, GRANULARITY_STEP,
                             SCORER_SELF_CERTAINTY)
from src.scorers.Scorer import Scorer, ScorerOutput
from src.utils.errors import DataError, MissingEvidenceError, ScorerError

logger = logging.getLogger(__name__)

DEGENERATE_FAILURE = 0.5


def self_certainty_raw(logit_rows):
    """
    Mean KL divergence of each row's softmax from the uniform distribution.
    """
    rows = np.asarray(logit_rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ScorerError("self-certainty needs at least one logit row")
    if rows.shape[1] < 2:
        raise ScorerError(f"self-certainty needs a vocabulary of at least 2, got {rows.shape[1]}")
    if not np.all(np.isfinite(rows)):
        raise ScorerError("self-certainty received non-finite logits")

    log_p = log_softmax(rows, axis=1)
    negative_entropy = np.sum(np.exp(log_p) * log_p, axis=1)
    log_v = math.log(rows.shape[1])
    kl = log_v + negative_entropy
    return float(min(max(np.mean(kl), 0.0), log_v))


def normalize_certainties(raw_values):
    """
    Min-max normalise raw certainties to [0, 1] and return failure scores 1 - c.
    """
    raw = np.asarray(raw_values, dtype=np.float64)
    if raw.size == 0:
        return []
    low, high = float(raw.min()), float(raw.max())
    if high == low:
        return [DEGENERATE_FAILURE] * raw.size
    certainty = (raw - low) / (high - low)
    return [float(v) for v in np.clip(1.0 - certainty, 0.0, 1.0)]


class SelfCertaintyScorer(Scorer):
    name = SCORER_SELF_CERTAINTY

    def __init__(self, settings=None):
        super().__init__(settings)
        self._scores = {}
        self._raw = {}
        self._errors = {}

    def _unit_rows(self, trace, granularity, sidecar):
        units = []
        for index, step in enumerate(trace.steps, start=1):
            if step.logits_ref is None:
                raise MissingEvidenceError("logits required by self_certainty are missing",
                                           trace_id=trace.id, step_index=index)
            if sidecar is None:
                raise MissingEvidenceError("no logits sidecar is available", trace_id=trace.id, step_index=index)
            units.append(sidecar.rows_for(step.logits_ref))
        if granularity == GRANULARITY_RESPONSE:
            return [np.vstack(units)]
        return units

    def prepare(self, dataset, granularity):
        super().prepare(dataset, granularity)
        self._scores, self._raw, self._errors = {}, {}, {}

        for trace in dataset.traces:
            try:
                rows = self._unit_rows(trace, granularity, dataset.sidecar_for(trace))
                self._raw[trace.id] = [self_certainty_raw(block) for block in rows]
            except DataError as e:
                if not isinstance(e, ScorerError) or e.trace_id is None:
                    e = ScorerError(str(e), trace_id=trace.id)
                self._errors[trace.id] = e

        # two-pass reduce: gather every unit, normalise once over the dataset
        order = [(trace_id, i) for trace_id, raws in self._raw.items() for i in range(len(raws))]
        failures = normalize_certainties([self._raw[trace_id][i] for trace_id, i in order])
        for (trace_id, i), failure in zip(order, failures):
            self._scores.setdefault(trace_id, []).append(failure)
        logger.info("Self-certainty prepared %d units over %d traces (%d errors)",
                    len(order), len(self._raw), len(self._errors))

    def score_trace(self, trace, granularity):
        self.check_granularity(granularity)
        if trace.id in self._errors:
            raise self._errors[trace.id]
        if trace.id not in self._scores:
            raise ScorerError("trace was not part of the prepared dataset", trace_id=trace.id)
        scores, raws = self._scores[trace.id], self._raw[trace.id]
        diagnostics = {"raw_self_certainty": raws if granularity == GRANULARITY_STEP else raws[0]}
        if granularity == GRANULARITY_STEP:
            return ScorerOutput(self.name, granularity, per_step=list(scores), diagnostics=diagnostics)
        return ScorerOutput(self.name, granularity, whole=scores[0], diagnostics=diagnostics)


def self_certainty_score(dataset, granularity):
    """
    Score every trace of a dataset; returns ({id: ScorerOutput}, {id: error}).
    """
    scorer = SelfCertaintyScorer()
    scorer.prepare(dataset, granularity)
    results = scorer.score_traces(dataset.traces, granularity)
    outputs = {k: v for k, v in results.items() if isinstance(v, ScorerOutput)}
    errors = {k: v for k, v in results.items() if not isinstance(v, ScorerOutput)}
    return outputs, errors

# *************************************************************************************************************************
#   VerbalizedScorer.py
#       Black-box scorer reading the confidence the agent states in its own text.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       parse_verbalized("... Confidence: 0.8", "unit")   -> 0.2 (failure score)
#       parse_verbalized("I am 85% sure", "percent")      -> 0.15
#
#   Design Notes:
#   -.  The last 'confidence[:=] <number>' match wins; without one, the last standalone number in the text wins.
#   -.  Values outside [0, 1] after scaling are clamped and flagged in the diagnostics.
#   -.  Step granularity parses each step's verbalized_text; response granularity parses the final step's text.
# *************************************************************************************************************************

import logging
import re

from config.DEFAULTS import (GRANULARITY_RESPONSE, GRANULARITY_STEP,
                             SCORER_VERBALIZED)
from src.scorers.Scorer import Scorer, ScorerOutput, as_failure_score
from src.utils.errors import MissingEvidenceError, ParseMissing, ScorerError

logger = logging.getLogger(__name__)

SCALES = {"unit": 1.0, "percent": 100.0}

_NUMBER = r"[-+]?(?:\d+(?:\.\d+)?|\.\d+)"
CONFIDENCE_PATTERN = re.compile(r"confidence\s*[:=]?\s*(" + _NUMBER + r")", re.IGNORECASE)
STANDALONE_PATTERN = re.compile(r"(?<![\w.])(" + _NUMBER + r")(?![\w])")


def parse_verbalized_detailed(text, scale="unit"):
    """
    Return (failure score, diagnostics) for a verbalized confidence; raises ParseMissing when no number is found.
    """
    if scale not in SCALES:
        raise ValueError(f"unknown confidence scale '{scale}'")
    text = text or ""
    matches = CONFIDENCE_PATTERN.findall(text)
    source = "confidence_tag"
    if not matches:
        matches = STANDALONE_PATTERN.findall(text)
        source = "last_number"
    if not matches:
        raise ParseMissing(text)

    raw = float(matches[-1])
    confidence = raw / SCALES[scale]
    clamped = not (0.0 <= confidence <= 1.0)
    confidence = min(max(confidence, 0.0), 1.0)
    return 1.0 - confidence, {"raw_value": raw, "source": source, "clamped": clamped}


def parse_verbalized(text, scale="unit"):
    failure, _ = parse_verbalized_detailed(text, scale)
    return failure


class VerbalizedScorer(Scorer):
    name = SCORER_VERBALIZED

    def __init__(self, settings=None):
        super().__init__(settings)
        self.scale = self.settings.get("scale", "unit")
        self.fallback_failure = self.settings.get("fallback_failure")
        if self.fallback_failure is not None:
            self.fallback_failure = as_failure_score(self.fallback_failure)

    def _parse_step(self, trace, index):
        step = trace.step(index)
        if step.verbalized_text is None:
            raise MissingEvidenceError("verbalized_text is missing", trace_id=trace.id, step_index=index)
        try:
            return parse_verbalized_detailed(step.verbalized_text, self.scale)
        except ParseMissing as e:
            if self.fallback_failure is None:
                raise ScorerError(str(e), trace_id=trace.id, step_index=index)
            logger.debug("No verbalized confidence in trace %s step %d; using fallback", trace.id, index)
            return self.fallback_failure, {"fallback": True}

    def score_trace(self, trace, granularity):
        self.check_granularity(granularity)
        if granularity == GRANULARITY_STEP:
            parsed = [self._parse_step(trace, i) for i in range(1, trace.n + 1)]
            return ScorerOutput(self.name, granularity, per_step=[f for f, _ in parsed],
                                diagnostics={"parse": [d for _, d in parsed]})
        failure, details = self._parse_step(trace, trace.n)
        return ScorerOutput(self.name, GRANULARITY_RESPONSE, whole=failure, diagnostics={"parse": details})

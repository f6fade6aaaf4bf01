# *************************************************************************************************************************
#   PrecomputedScorer.py
#       Passthrough scorer for scores produced outside the toolkit (fine-tuned regressors, reward models ...).
# -------------------------------------------------------------------------------------------------------------------
#   Design Notes:
#   -.  Scores are read from step.precomputed_scores[<source>]; 'confidence' orientation is flipped to 1 - value.
#   -.  Response granularity reads the entry on the final step, the score emitted once the whole interaction is seen.
#   -.  Values outside [0, 1] are rejected: the producing models regress scores in that range.
# *************************************************************************************************************************

from config.DEFAULTS import (GRANULARITY_RESPONSE, GRANULARITY_STEP,
                             PRECOMPUTED_PREFIX)
from src.scorers.Scorer import Scorer, ScorerOutput
from src.utils.errors import MissingScoreError, ScoreRangeError


def _step_failure(trace, index, source):
    entry = trace.step(index).precomputed_scores.get(source)
    if entry is None:
        raise MissingScoreError(f"precomputed score '{source}' is missing", trace_id=trace.id, step_index=index)
    try:
        return entry.failure_score()
    except ScoreRangeError as e:
        raise ScoreRangeError(str(e), trace_id=trace.id, step_index=index)


def precomputed_score(trace, scorer_name, granularity):
    source = scorer_name[len(PRECOMPUTED_PREFIX):] if scorer_name.startswith(PRECOMPUTED_PREFIX) else scorer_name
    name = PRECOMPUTED_PREFIX + source
    if granularity == GRANULARITY_STEP:
        return ScorerOutput(name, granularity,
                            per_step=[_step_failure(trace, i, source) for i in range(1, trace.n + 1)])
    if granularity == GRANULARITY_RESPONSE:
        return ScorerOutput(name, granularity, whole=_step_failure(trace, trace.n, source))
    raise ValueError(f"unknown granularity '{granularity}'")


class PrecomputedScorer(Scorer):

    def __init__(self, settings=None):
        super().__init__(settings)
        self.source = self.settings["source"]
        self.name = PRECOMPUTED_PREFIX + self.source

    def score_trace(self, trace, granularity):
        self.check_granularity(granularity)
        return precomputed_score(trace, self.source, granularity)

import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from config.DEFAULTS import GRANULARITY_RESPONSE, GRANULARITY_STEP
from src.utils.errors import DataError, ScoreRangeError, ScorerError

logger = logging.getLogger(__name__)


def as_failure_score(value, trace_id=None, step_index=None):
    """
    Validate a failure score: a finite real in [0, 1], higher = more likely incorrect.
    """
    value = float(value)
    if value != value or not (0.0 <= value <= 1.0):
        raise ScoreRangeError(f"failure score {value} outside [0, 1]", trace_id=trace_id, step_index=step_index)
    return value


@dataclass
class ScorerOutput:
    scorer_name: str
    granularity: str
    per_step: Optional[List[float]] = None
    whole: Optional[float] = None
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.granularity == GRANULARITY_STEP:
            if self.per_step is None or self.whole is not None:
                raise ValueError("step granularity carries per_step scores only")
        elif self.granularity == GRANULARITY_RESPONSE:
            if self.whole is None or self.per_step is not None:
                raise ValueError("response granularity carries a whole score only")
        else:
            raise ValueError(f"unknown granularity '{self.granularity}'")


class Scorer(ABC):
    """
           A confidence scorer mapping interaction evidence to failure scores.

           ...

           Attributes
           ----------
           name : stable scorer name used in reports
           granularities : granularities the scorer supports

           Methods
           -------
           prepare() : dataset-level pass run before any trace is scored (normalisation, model loading)

           score_trace(): score one trace at one granularity

           score_traces(): score many traces, collecting per-trace errors
    """

    name = "scorer"
    granularities = (GRANULARITY_RESPONSE, GRANULARITY_STEP)

    def __init__(self, settings=None):
        self.settings = dict(settings or {})

    def check_granularity(self, granularity):
        if granularity not in self.granularities:
            raise ScorerError(f"scorer '{self.name}' does not support granularity '{granularity}'")

    def prepare(self, dataset, granularity):
        """
        Called once with the whole TraceDataset before scoring.
        """
        self.check_granularity(granularity)

    @abstractmethod
    def score_trace(self, trace, granularity):
        """
        Score one trace.

        Returns
        -------
        ScorerOutput
        """

    def score_traces(self, traces, granularity, workers=1):
        """
        Score traces, returning {trace id: ScorerOutput or the DataError raised for it}.
        """
        def run(trace):
            try:
                return trace.id, self.score_trace(trace, granularity)
            except DataError as e:
                return trace.id, e

        if workers <= 1:
            return dict(run(trace) for trace in traces)
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix=f"score-{self.name}") as pool:
            return dict(pool.map(run, traces))

    def close(self):
        pass

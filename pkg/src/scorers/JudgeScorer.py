import logging

from config.DEFAULTS import GRANULARITY_STEP, SCORER_JUDGE
from src.judge.JudgeClient import JudgeClient, JudgeConfig
from src.scorers.Scorer import Scorer, ScorerOutput
from src.utils.errors import JudgeError

logger = logging.getLogger(__name__)


class JudgeScorer(Scorer):
    """
    Auxiliary-evaluator scorer: one judge call per step at step granularity, one per trace at response granularity.
    Settings are the judge section of the run configuration.
    """

    name = SCORER_JUDGE

    def __init__(self, settings=None):
        super().__init__(settings)
        self.config = JudgeConfig.from_settings(self.settings)
        self.client = None
        self.transcripts = {}

    def prepare(self, dataset, granularity):
        super().prepare(dataset, granularity)
        if self.client is None:
            self.client = JudgeClient(self.config)

    def _requests(self, trace, granularity):
        if granularity == GRANULARITY_STEP:
            return [(trace, granularity, i) for i in range(1, trace.n + 1)]
        return [(trace, granularity, None)]

    def _assemble(self, trace, granularity, results):
        outcomes = [results[(trace.id, step_index)] for _, _, step_index in self._requests(trace, granularity)]
        for outcome in outcomes:
            if isinstance(outcome, JudgeError):
                raise outcome
        scores = [failure for failure, _ in outcomes]
        diagnostics = {"attempts": [transcript.attempts for _, transcript in outcomes],
                       "template": self.config.template, "template_source": "toolkit-defined"}
        self.transcripts[trace.id] = [transcript for _, transcript in outcomes]
        if granularity == GRANULARITY_STEP:
            return ScorerOutput(self.name, granularity, per_step=scores, diagnostics=diagnostics)
        return ScorerOutput(self.name, granularity, whole=scores[0], diagnostics=diagnostics)

    def score_trace(self, trace, granularity):
        self.check_granularity(granularity)
        if self.client is None:
            self.client = JudgeClient(self.config)
        results = self.client.judge_many(self._requests(trace, granularity))
        return self._assemble(trace, granularity, results)

    def score_traces(self, traces, granularity, workers=1):
        self.check_granularity(granularity)
        if self.client is None:
            self.client = JudgeClient(self.config)
        requests_ = [request for trace in traces for request in self._requests(trace, granularity)]
        logger.info("Sending %d judge requests (max %d in flight)", len(requests_), self.config.max_concurrency)
        results = self.client.judge_many(requests_)
        outputs = {}
        for trace in traces:
            try:
                outputs[trace.id] = self._assemble(trace, granularity, results)
            except JudgeError as e:
                outputs[trace.id] = e
        return outputs

    def close(self):
        if self.client is not None:
            self.client.close()
            self.client = None

import logging

from config.DEFAULTS import GRANULARITY_STEP, SCORER_ACTIVATIONS
from src.probe.ProbeModel import load_probe, probe_score_trace
from src.scorers.Scorer import Scorer
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)


class ActivationsScorer(Scorer):
    """
    White-box scorer applying a trained probe to each step's final hidden state.

    Settings: model_path, the probe file written by train-probe. A ProbeModel may also be passed as 'model'.
    """

    name = SCORER_ACTIVATIONS
    granularities = (GRANULARITY_STEP,)

    def __init__(self, settings=None):
        super().__init__(settings)
        self.model = self.settings.get("model")
        self.model_hash = None
        if self.model is None:
            model_path = self.settings.get("model_path")
            if not model_path:
                raise ConfigError("the activations scorer needs a trained probe", field_path="scorers.settings.model_path")
            self.model, self.model_hash = load_probe(model_path)
            logger.info("Loaded probe %s from %s", self.model.dims, model_path)

    def score_trace(self, trace, granularity):
        self.check_granularity(granularity)
        output = probe_score_trace(self.model, trace)
        if self.model_hash:
            output.diagnostics["probe_config_hash"] = self.model_hash
        return output

# *************************************************************************************************************************
#   SynthGenerator.py
#       Seeded synthetic traces with planted step errors and ground-truth oracles for end-to-end validation.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       config = SynthConfig.from_file("synth.json")        # or SynthConfig.from_dict({...})
#       traces, logits = generate(config)                   # logits: T x V float32 rows for the sidecar
#       expected_step_auc(config); expected_aggregate_aucs(config)
#
#   Generative model, per trace:
#   -.  n steps (fixed or uniform on [lo, hi]); step labels i.i.d. Bernoulli(error_rate); response_label = max.
#   -.  answer_label is the final step's label, so an early error with a correct last step is a flawed-reasoning
#       case with a correct answer.
#   -.  'planted' failure score on every step, drawn from the law of the step's class.
#   -.  'planted_response' on the final step: one draw per trace from the law of the final step's class. It sees
#       the outcome of the interaction, not the intermediate steps.
#   -.  Hidden state ~ N(+mean, sigma^2 I) for incorrect steps and N(-mean, sigma^2 I) for correct ones.
#   -.  One logits row per step, N(0, 1) * scale with a large scale for correct steps (peaked softmax, high
#       self-certainty) and a small one for incorrect steps.
#   -.  Correct responses equal the gold response; incorrect ones carry an 'AGENT#<id>#<i>' marker.
#
#   Design Notes:
#   -.  The stream of a shard is numpy's default_rng(SeedSequence([seed, shard])): shards are independent and
#       every shard is reproducible on its own.
#   -.  Laws are {"beta": [a, b]} or {"point": v}.
# *************************************************************************************************************************

import copy
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from config.DEFAULTS import (DEFAULT_SYNTH_CONFIG, DEFAULT_SYNTH_CONFIG_SCHEMA,
                             MONTE_CARLO_DRAWS)
from src.metrics.DetectionMetrics import auc_from_arrays
from src.traces.TraceModel import (ORIENTATION_FAILURE, InteractionTrace,
                                   LogitsRef, PrecomputedScore, StepRecord)
from src.utils.errors import ConfigError, UndefinedMetric
from src.utils.helperFunctions import (config_hash, load_json_file,
                                       validate_config_json)

logger = logging.getLogger(__name__)

PLANTED_SCORE = "planted"
PLANTED_RESPONSE_SCORE = "planted_response"
AGENT_MARKER = "AGENT#"
# distinct stream for the Monte Carlo oracles
_ORACLE_STREAM = 0x5EED


@dataclass(frozen=True)
class ScoreLaw:
    beta: Optional[tuple] = None
    point: Optional[float] = None

    @classmethod
    def from_dict(cls, law):
        if "beta" in law:
            a, b = (float(v) for v in law["beta"])
            if a <= 0 or b <= 0:
                raise ConfigError("beta parameters must be positive", field_path="score_model")
            return cls(beta=(a, b))
        return cls(point=float(law["point"]))

    def draw(self, rng, size=None):
        if self.beta is not None:
            return rng.beta(self.beta[0], self.beta[1], size=size)
        if size is None:
            return self.point
        return np.full(size, self.point, dtype=np.float64)


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    trace_count: int
    steps: Dict[str, object]
    error_rate: float
    correct_law: ScoreLaw
    incorrect_law: ScoreLaw
    dimension: int
    mean: float
    sigma: float
    vocab_size: int
    correct_logit_scale: float
    incorrect_logit_scale: float
    shard: int
    document: Dict[str, object]

    @classmethod
    def from_dict(cls, document=None):
        merged = copy.deepcopy(DEFAULT_SYNTH_CONFIG)
        for key, value in (document or {}).items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict) and key not in ("steps",):
                merged[key].update(value)
            else:
                merged[key] = copy.deepcopy(value)
        validate_config_json(merged, DEFAULT_SYNTH_CONFIG_SCHEMA)
        if "uniform" in merged["steps"]:
            low, high = merged["steps"]["uniform"]
            if low > high:
                raise ConfigError("uniform step range is empty", field_path="steps.uniform")
        hidden = merged["hidden_state_model"]
        return cls(
            seed=merged["seed"], trace_count=merged["trace_count"], steps=merged["steps"],
            error_rate=float(merged["error_rate"]),
            correct_law=ScoreLaw.from_dict(merged["score_model"]["correct"]),
            incorrect_law=ScoreLaw.from_dict(merged["score_model"]["incorrect"]),
            dimension=hidden["dimension"], mean=float(hidden["mean"]), sigma=float(hidden["sigma"]),
            vocab_size=merged["vocab_size"],
            correct_logit_scale=float(merged["logit_scale"]["correct"]),
            incorrect_logit_scale=float(merged["logit_scale"]["incorrect"]),
            shard=merged["shard"], document=merged)

    @classmethod
    def from_file(cls, path):
        return cls.from_dict(load_json_file(path))

    def config_hash(self):
        return config_hash(self.document)

    def law(self, label):
        return self.incorrect_law if label else self.correct_law

    def step_count(self, rng):
        if "fixed" in self.steps:
            return int(self.steps["fixed"])
        low, high = self.steps["uniform"]
        return int(rng.integers(low, high + 1))


def _shard_rng(seed, shard):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(shard)]))


def generate(config, shard=None):
    """
    Generate config.trace_count traces; returns (traces, logits matrix of shape [total steps, vocab_size]).
    """
    shard = config.shard if shard is None else int(shard)
    rng = _shard_rng(config.seed, shard)
    traces, rows = [], []
    for number in range(config.trace_count):
        trace_id = f"synth-{shard:03d}-{number:06d}"
        n = config.step_count(rng)
        labels = (rng.random(n) < config.error_rate).astype(int)
        steps = []
        for index, label in enumerate(labels, start=1):
            label = int(label)
            failure = float(config.law(label).draw(rng))
            sign = 1.0 if label else -1.0
            hidden_state = rng.normal(sign * config.mean, config.sigma, size=config.dimension)
            scale = config.incorrect_logit_scale if label else config.correct_logit_scale
            rows.append(rng.standard_normal(config.vocab_size) * scale)
            gold = f"gold {trace_id} step {index}: value {index * 7}"
            response = gold if label == 0 else f"{AGENT_MARKER}{trace_id}#{index}: value {index * 7 + 1}"
            steps.append(StepRecord(
                query=f"Q{index}: compute the value of step {index}",
                response=response,
                gold_response=gold,
                step_label=label,
                logits_ref=LogitsRef(len(rows) - 1, 1),
                hidden_state=tuple(float(v) for v in hidden_state),
                verbalized_text=f"{response}\nConfidence: {1.0 - failure:.4f}",
                precomputed_scores={PLANTED_SCORE: PrecomputedScore(failure, ORIENTATION_FAILURE)},
            ))
        final_label = int(labels[-1])
        steps[-1].precomputed_scores[PLANTED_RESPONSE_SCORE] = PrecomputedScore(
            float(config.law(final_label).draw(rng)), ORIENTATION_FAILURE)
        traces.append(InteractionTrace(
            id=trace_id, context=f"Synthetic problem {trace_id} with {n} steps.", steps=steps,
            response_label=int(labels.max()), answer_label=final_label))

    logits = np.asarray(rows, dtype=np.float32).reshape(len(rows), config.vocab_size)
    logger.info("Generated %d traces (%d steps) for seed %d shard %d",
                len(traces), logits.shape[0], config.seed, shard)
    return traces, logits


# ***********************************************
#  oracles
# ***********************************************

def _pairwise_win_rate(incorrect, correct):
    return float(np.mean(incorrect > correct) + 0.5 * np.mean(incorrect == correct))


def expected_step_auc(config, draws=MONTE_CARLO_DRAWS):
    """
    P(F_incorrect > F_correct) + 0.5 P(F_incorrect = F_correct) under the two score laws.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), _ORACLE_STREAM]))
    incorrect = config.incorrect_law.draw(rng, draws)
    correct = config.correct_law.draw(rng, draws)
    return _pairwise_win_rate(incorrect, correct)


def expected_aggregate_aucs(config, trace_count=20000, aggregator=np.max):
    """
    Simulate the generative model and return the response-level AUCs of the aggregated step scores and of the
    single response-level draw: {"step_aggregate": ..., "response_draw": ...}. None when a class is absent.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), _ORACLE_STREAM, 1]))
    aggregated = np.empty(trace_count)
    response_draw = np.empty(trace_count)
    response_labels = np.empty(trace_count, dtype=np.int64)
    for t in range(trace_count):
        n = config.step_count(rng)
        labels = (rng.random(n) < config.error_rate).astype(int)
        scores = np.where(labels == 1,
                          config.incorrect_law.draw(rng, n), config.correct_law.draw(rng, n))
        aggregated[t] = aggregator(scores)
        response_draw[t] = config.law(int(labels[-1])).draw(rng)
        response_labels[t] = labels.max()
    try:
        return {"step_aggregate": auc_from_arrays(aggregated, response_labels),
                "response_draw": auc_from_arrays(response_draw, response_labels)}
    except UndefinedMetric:
        return {"step_aggregate": None, "response_draw": None}

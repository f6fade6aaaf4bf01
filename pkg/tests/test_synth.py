import filecmp
import math
import os
import shutil
import tempfile
import unittest

import numpy as np

from src.metrics.DetectionMetrics import auc_from_arrays
from src.synth.SynthGenerator import (AGENT_MARKER, PLANTED_RESPONSE_SCORE,
                                      PLANTED_SCORE, SynthConfig,
                                      expected_aggregate_aucs,
                                      expected_step_auc, generate)
from src.traces.LogitsSidecar import write_sidecar
from src.traces.TraceIO import save_traces
from src.utils.errors import ConfigError


def step_arrays(traces, source=PLANTED_SCORE):
    scores = [s.precomputed_scores[source].value for t in traces for s in t.steps]
    labels = [s.step_label for t in traces for s in t.steps]
    return np.asarray(scores), np.asarray(labels)


class TestSynthConfig(unittest.TestCase):

    def test_defaults(self):
        config = SynthConfig.from_dict()
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.correct_law.beta, (2.0, 8.0))
        self.assertEqual(config.incorrect_law.beta, (8.0, 2.0))

    def test_schema_violations(self):
        for document, field_path in (({"error_rate": 1.5}, "error_rate"),
                                     ({"score_model": {"correct": {"beta": [0, 1]}}}, "score_model.correct"),
                                     ({"hidden_state_model": {"dimension": 0}}, "hidden_state_model.dimension"),
                                     ({"colour": "blue"}, "<root>")):
            with self.assertRaises(ConfigError) as caught:
                SynthConfig.from_dict(document)
            self.assertEqual(caught.exception.field_path, field_path)

    def test_empty_uniform_range(self):
        with self.assertRaises(ConfigError):
            SynthConfig.from_dict({"steps": {"uniform": [5, 2]}})

    def test_hash_tracks_content(self):
        self.assertEqual(SynthConfig.from_dict({"seed": 1}).config_hash(),
                         SynthConfig.from_dict({"seed": 1}).config_hash())
        self.assertNotEqual(SynthConfig.from_dict({"seed": 1}).config_hash(),
                            SynthConfig.from_dict({"seed": 2}).config_hash())


class TestGenerate(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def test_no_errors(self):
        traces, _ = generate(SynthConfig.from_dict({"trace_count": 50, "error_rate": 0.0}))
        self.assertTrue(all(s.step_label == 0 for t in traces for s in t.steps))
        self.assertTrue(all(t.response_label == 0 and t.answer_label == 0 for t in traces))
        self.assertFalse(any(AGENT_MARKER in s.response for t in traces for s in t.steps))

    def test_all_errors(self):
        traces, _ = generate(SynthConfig.from_dict({"trace_count": 50, "error_rate": 1.0}))
        self.assertTrue(all(s.step_label == 1 for t in traces for s in t.steps))
        self.assertTrue(all(t.response_label == 1 for t in traces))

    def test_shapes(self):
        config = SynthConfig.from_dict({"trace_count": 20, "steps": {"uniform": [2, 5]}, "vocab_size": 16,
                                        "hidden_state_model": {"dimension": 3}})
        traces, logits = generate(config)
        self.assertEqual(len(traces), 20)
        self.assertEqual(logits.shape, (sum(t.n for t in traces), 16))
        self.assertEqual(logits.dtype, np.float32)
        self.assertTrue(all(2 <= t.n <= 5 for t in traces))
        rows = [s.logits_ref.row_offset for t in traces for s in t.steps]
        self.assertEqual(rows, list(range(len(rows))))
        self.assertTrue(all(len(s.hidden_state) == 3 for t in traces for s in t.steps))

    def test_labels_are_consistent(self):
        traces, _ = generate(SynthConfig.from_dict({"trace_count": 300, "error_rate": 0.2}))
        for trace in traces:
            self.assertEqual(trace.response_label, max(s.step_label for s in trace.steps))
            self.assertEqual(trace.answer_label, trace.steps[-1].step_label)
            self.assertIn(PLANTED_RESPONSE_SCORE, trace.steps[-1].precomputed_scores)
            for step in trace.steps:
                self.assertEqual(step.step_label, int(step.response != step.gold_response))

    def test_same_seed_writes_identical_files(self):
        config = SynthConfig.from_dict({"trace_count": 100, "seed": 7})
        for name in ("first", "second"):
            traces, logits = generate(config)
            save_traces(traces, os.path.join(self.directory, f"{name}.jsonl"))
            write_sidecar(os.path.join(self.directory, f"{name}.logits.bin"), logits)
        self.assertTrue(filecmp.cmp(os.path.join(self.directory, "first.jsonl"),
                                    os.path.join(self.directory, "second.jsonl"), shallow=False))
        self.assertTrue(filecmp.cmp(os.path.join(self.directory, "first.logits.bin"),
                                    os.path.join(self.directory, "second.logits.bin"), shallow=False))

    def test_shards_are_independent(self):
        config = SynthConfig.from_dict({"trace_count": 10})
        first, _ = generate(config, shard=0)
        second, _ = generate(config, shard=1)
        self.assertNotEqual(first[0].id, second[0].id)
        self.assertNotEqual(first[0].steps[0].hidden_state, second[0].steps[0].hidden_state)

    def test_error_rate(self):
        epsilon = 0.1
        config = SynthConfig.from_dict({"trace_count": 1250, "error_rate": epsilon, "steps": {"fixed": 8}})
        _, labels = step_arrays(generate(config)[0])
        sigma = math.sqrt(epsilon * (1 - epsilon) / labels.size)
        self.assertLess(abs(labels.mean() - epsilon), 3 * sigma)


class TestOracles(unittest.TestCase):

    def test_identical_laws(self):
        config = SynthConfig.from_dict({"score_model": {"correct": {"beta": [3, 3]}, "incorrect": {"beta": [3, 3]}}})
        self.assertAlmostEqual(expected_step_auc(config), 0.5, delta=0.005)

    def test_point_masses(self):
        separated = SynthConfig.from_dict({"score_model": {"correct": {"point": 0.1}, "incorrect": {"point": 0.9}}})
        self.assertEqual(expected_step_auc(separated, draws=1000), 1.0)
        tied = SynthConfig.from_dict({"score_model": {"correct": {"point": 0.4}, "incorrect": {"point": 0.4}}})
        self.assertEqual(expected_step_auc(tied, draws=1000), 0.5)

    def test_stable_across_seeds(self):
        values = [expected_step_auc(SynthConfig.from_dict({"seed": seed})) for seed in range(3)]
        self.assertLess(max(values) - min(values), 0.005)
        self.assertGreater(values[0], 0.95)

    def test_empirical_step_auc_matches_oracle(self):
        for seed in (1, 2, 3):
            config = SynthConfig.from_dict({"seed": seed, "trace_count": 1250, "steps": {"fixed": 8},
                                            "error_rate": 0.3})
            scores, labels = step_arrays(generate(config)[0])
            self.assertEqual(scores.size, 10000)
            self.assertLess(abs(auc_from_arrays(scores, labels) - expected_step_auc(config)), 0.01)

    def test_step_aggregation_beats_response_draw(self):
        for seed in range(5):
            config = SynthConfig.from_dict({"seed": seed, "trace_count": 5000, "steps": {"fixed": 8},
                                            "error_rate": 0.1})
            traces, _ = generate(config)
            labels = np.asarray([t.response_label for t in traces])
            step_max = np.asarray([max(s.precomputed_scores[PLANTED_SCORE].value for s in t.steps) for t in traces])
            response = np.asarray([t.steps[-1].precomputed_scores[PLANTED_RESPONSE_SCORE].value for t in traces])
            self.assertGreaterEqual(auc_from_arrays(step_max, labels) - auc_from_arrays(response, labels), 0.05)

    def test_aggregate_oracle_predicts_step_advantage(self):
        config = SynthConfig.from_dict({"steps": {"fixed": 8}, "error_rate": 0.1})
        expected = expected_aggregate_aucs(config, trace_count=5000)
        self.assertGreater(expected["step_aggregate"] - expected["response_draw"], 0.05)

    def test_aggregate_oracle_single_class(self):
        config = SynthConfig.from_dict({"error_rate": 0.0})
        self.assertEqual(expected_aggregate_aucs(config, trace_count=50),
                         {"step_aggregate": None, "response_draw": None})


if __name__ == '__main__':
    unittest.main()

import os
import shutil
import struct
import tempfile
import unittest

import numpy as np
import torch
from sklearn.metrics import roc_auc_score

from src.probe.ProbeModel import (PROBE_MAGIC, PROBE_VERSION, ProbeModel,
                                  load_probe, probe_forward, probe_predict,
                                  probe_score, save_probe)
from src.probe.ProbeTrainer import (ProbeTrainConfig, examples_from_traces,
                                    probe_loss, probe_train,
                                    split_train_validation,
                                    write_training_curve)
from src.scorers.ActivationsScorer import ActivationsScorer
from src.utils.errors import (ConfigError, MissingEvidenceError,
                              ProbeDimensionError, ProbeFormatError,
                              ProbeTrainingError)
from tests.traceFixtures import make_trace


def gaussian_examples(rng, count, dimension=8, mean=2.0):
    labels = rng.integers(0, 2, size=count)
    signs = np.where(labels == 1, 1.0, -1.0)[:, None]
    features = rng.normal(signs * mean, 1.0, size=(count, dimension))
    return [(tuple(x), int(y)) for x, y in zip(features, labels)]


class TestProbeModel(unittest.TestCase):

    def test_layer_dimensions(self):
        model = ProbeModel(64)
        self.assertEqual(model.dims, [64, 256, 128, 64, 32, 1])
        self.assertEqual(len(model.layers), 5)

    def test_zero_parameters_give_one_half(self):
        model = ProbeModel(4, [3, 2])
        with torch.no_grad():
            for parameter in model.parameters():
                parameter.zero_()
        self.assertAlmostEqual(probe_forward(model, [1.0, -2.0, 3.0, 0.5]), 0.5)

    def test_output_in_unit_interval(self):
        model = ProbeModel(6, seed=3)
        rng = np.random.default_rng(3)
        scores = probe_predict(model, rng.normal(0, 5, size=(50, 6)))
        self.assertTrue(np.all((scores > 0.0) & (scores < 1.0)))

    def test_dimension_mismatch(self):
        with self.assertRaises(ProbeDimensionError):
            probe_forward(ProbeModel(4, [3]), [1.0, 2.0, 3.0])

    def test_initialisation_is_seeded(self):
        first, second, other = ProbeModel(5, [4], seed=1), ProbeModel(5, [4], seed=1), ProbeModel(5, [4], seed=2)
        for a, b in zip(first.parameters(), second.parameters()):
            self.assertTrue(torch.equal(a, b))
        self.assertFalse(torch.equal(first.layers[0].weight, other.layers[0].weight))

    def test_initialisation_bounds(self):
        model = ProbeModel(16, [9], seed=0)
        for layer in model.layers:
            bound = 1.0 / np.sqrt(layer.in_features)
            self.assertLessEqual(float(layer.weight.abs().max()), bound + 1e-6)

    def test_gradient_matches_finite_differences(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            model = ProbeModel(3, [5, 4], seed=seed, dtype=torch.float64)
            x = torch.as_tensor(rng.normal(size=(6, 3)), dtype=torch.float64)
            y = torch.as_tensor(rng.integers(0, 2, size=6), dtype=torch.float64)

            model.zero_grad()
            probe_loss(model, x, y).backward()
            analytic = torch.cat([p.grad.reshape(-1) for p in model.parameters()]).numpy()

            numeric = []
            h = 1e-4
            with torch.no_grad():
                for parameter in model.parameters():
                    flat = parameter.view(-1)
                    for k in range(flat.numel()):
                        saved = float(flat[k])
                        flat[k] = saved + h
                        upper = float(probe_loss(model, x, y))
                        flat[k] = saved - h
                        lower = float(probe_loss(model, x, y))
                        flat[k] = saved
                        numeric.append((upper - lower) / (2 * h))
            numeric = np.asarray(numeric)
            error = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
            self.assertLess(error, 1e-4, f"seed {seed}")


class TestProbeTraining(unittest.TestCase):

    def test_separable_toy_problem(self):
        rng = np.random.default_rng(0)
        labels = np.tile([0, 1], 100)
        features = np.column_stack([np.where(labels == 1, 1.0, -1.0) * (1.0 + rng.random(200)),
                                    rng.normal(0, 1.0, size=200)])
        dataset = list(zip(map(tuple, features), labels))
        config = ProbeTrainConfig(learning_rate=1e-2, batch_size=16, epochs=200, seed=0,
                                  validation_fraction=0.2, patience=200, hidden_dims=(8,))
        result = probe_train(dataset, config)
        predictions = probe_predict(result.model, features) > 0.5
        self.assertEqual(float(np.mean(predictions == labels.astype(bool))), 1.0)

    def test_gaussian_classes(self):
        rng = np.random.default_rng(11)
        train, test = gaussian_examples(rng, 2000), gaussian_examples(rng, 1000)
        config = ProbeTrainConfig(epochs=10, batch_size=64, seed=0)
        result = probe_train(train, config)
        scores = probe_predict(result.model, np.asarray([x for x, _ in test]))
        self.assertGreaterEqual(roc_auc_score([y for _, y in test], scores), 0.95)

    def test_single_class_dataset(self):
        dataset = [((float(k), 1.0), 0) for k in range(10)]
        with self.assertRaises(ProbeTrainingError):
            probe_train(dataset)

    def test_empty_dataset(self):
        with self.assertRaises(ProbeTrainingError):
            probe_train([])

    def test_inconsistent_dimensions(self):
        with self.assertRaises(ProbeDimensionError):
            probe_train([((1.0, 2.0), 0), ((1.0,), 1)])

    def test_training_is_deterministic(self):
        dataset = gaussian_examples(np.random.default_rng(5), 200, dimension=4)
        config = ProbeTrainConfig(epochs=5, batch_size=16, seed=9, hidden_dims=(8, 4))
        first, second = probe_train(dataset, config), probe_train(dataset, config)
        for a, b in zip(first.model.parameters(), second.model.parameters()):
            self.assertTrue(torch.equal(a, b))
        self.assertEqual([p.val_loss for p in first.curve], [p.val_loss for p in second.curve])

    def test_small_learning_rate_decreases_training_loss(self):
        dataset = gaussian_examples(np.random.default_rng(2), 100, dimension=4)
        config = ProbeTrainConfig(learning_rate=1e-4, batch_size=100, epochs=20, seed=0,
                                  patience=100, hidden_dims=(8, 4))
        result = probe_train(dataset, config, dtype=torch.float64)
        losses = [point.train_loss for point in result.curve]
        self.assertEqual(len(losses), 20)
        for earlier, later in zip(losses, losses[1:]):
            self.assertLessEqual(later, earlier)

    def test_early_stopping_keeps_best_epoch(self):
        dataset = gaussian_examples(np.random.default_rng(4), 200, dimension=4)
        config = ProbeTrainConfig(learning_rate=1e-2, epochs=200, patience=3, seed=0, hidden_dims=(16,))
        result = probe_train(dataset, config)
        best = min(result.curve, key=lambda point: point.val_loss)
        self.assertEqual(result.best_epoch, best.epoch)
        features, labels = result.validation
        with torch.no_grad():
            loss = float(probe_loss(result.model, torch.as_tensor(features, dtype=torch.float32),
                                    torch.as_tensor(labels, dtype=torch.float32)))
        self.assertAlmostEqual(loss, best.val_loss, places=5)

    def test_stratified_split(self):
        labels = np.array([0] * 45 + [1] * 5)
        train_index, validation_index = split_train_validation(labels, 0.2, 0)
        self.assertEqual(len(validation_index), 10)
        self.assertEqual(int(labels[validation_index].sum()), 1)
        self.assertFalse(set(train_index) & set(validation_index))

    def test_tiny_validation_holds_both_classes(self):
        labels = np.array([0] * 48 + [1] * 2)
        for seed in range(20):
            train_index, validation_index = split_train_validation(labels, 0.04, seed)
            self.assertEqual(len(validation_index), 2)
            self.assertEqual(sorted(labels[validation_index].tolist()), [0, 1])
            self.assertEqual(len(train_index), 48)
            self.assertIn(1, labels[train_index].tolist())
            self.assertFalse(set(train_index) & set(validation_index))

    def test_config_validation(self):
        with self.assertRaises(ConfigError) as caught:
            ProbeTrainConfig(learning_rate=0)
        self.assertEqual(caught.exception.field_path, "probe.learning_rate")
        with self.assertRaises(ConfigError):
            ProbeTrainConfig.from_settings({"validation_fraction": 1.0})
        self.assertEqual(ProbeTrainConfig.from_settings({}).hidden_dims, (256, 128, 64, 32))

    def test_examples_from_traces(self):
        trace = make_trace("t", step_labels=[0, 1, None], hidden=[[1.0], [2.0], [3.0]])
        self.assertEqual(examples_from_traces([trace]), [((1.0,), 0), ((2.0,), 1)])


class TestProbePersistence(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def test_save_and_load(self):
        model = ProbeModel(6, [5, 3], seed=4)
        path = os.path.join(self.directory, "probe.bin")
        digest = "ab" * 32
        save_probe(model, path, config_hash=digest)
        loaded, loaded_hash = load_probe(path)
        self.assertEqual(loaded_hash, digest)
        self.assertEqual(loaded.dims, model.dims)
        self.assertEqual(loaded.seed, 4)
        x = np.random.default_rng(0).normal(size=(10, 6))
        np.testing.assert_array_equal(probe_predict(loaded, x), probe_predict(model, x))

    def test_bad_file(self):
        path = os.path.join(self.directory, "probe.bin")
        with open(path, "wb") as handle:
            handle.write(b"NOPE" + b"\x00" * 40)
        with self.assertRaises(ProbeFormatError):
            load_probe(path)

    def test_truncated_parameters(self):
        path = os.path.join(self.directory, "probe.bin")
        save_probe(ProbeModel(3, [2]), path)
        with open(path, "rb") as handle:
            blob = handle.read()
        with open(path, "wb") as handle:
            handle.write(blob[:-4])
        with self.assertRaises(ProbeFormatError):
            load_probe(path)

    def test_truncated_header(self):
        path = os.path.join(self.directory, "probe.bin")
        with open(path, "wb") as handle:
            handle.write(struct.pack("<4sII", PROBE_MAGIC, PROBE_VERSION, 5))
            handle.write(struct.pack("<Q", 6))
        with self.assertRaises(ProbeFormatError):
            load_probe(path)

    def test_training_curve_csv(self):
        dataset = gaussian_examples(np.random.default_rng(1), 40, dimension=2)
        result = probe_train(dataset, ProbeTrainConfig(epochs=3, patience=10, hidden_dims=(4,)))
        path = write_training_curve(result.curve, os.path.join(self.directory, "curve.csv"))
        with open(path, "r") as handle:
            lines = handle.read().splitlines()
        self.assertEqual(lines[0], "epoch,train_loss,val_loss")
        self.assertEqual(len(lines), 4)


class TestProbeScoring(unittest.TestCase):

    def test_missing_hidden_state(self):
        model = ProbeModel(2, [3])
        complete = make_trace("ok", n=2, hidden=[[0.1, 0.2], [0.3, 0.4]])
        missing = make_trace("bad", n=3, hidden=[[0.1, 0.2], None, [0.5, 0.6]])
        outputs, errors = probe_score(model, [complete, missing])
        self.assertEqual(len(outputs["ok"].per_step), 2)
        self.assertIsInstance(errors["bad"], MissingEvidenceError)
        self.assertEqual(errors["bad"].step_index, 2)

    def test_wrong_dimension_in_trace(self):
        _, errors = probe_score(ProbeModel(2, [3]), [make_trace("t", n=1, hidden=[[1.0, 2.0, 3.0]])])
        self.assertEqual(errors["t"].step_index, 1)

    def test_activations_scorer(self):
        model = ProbeModel(2, [3], seed=1)
        trace = make_trace("t", n=2, hidden=[[0.1, 0.2], [0.3, 0.4]])
        output = ActivationsScorer({"model": model}).score_trace(trace, "step")
        np.testing.assert_allclose(output.per_step, probe_predict(model, [[0.1, 0.2], [0.3, 0.4]]))

    def test_activations_scorer_needs_a_model(self):
        with self.assertRaises(ConfigError):
            ActivationsScorer({})


if __name__ == '__main__':
    unittest.main()

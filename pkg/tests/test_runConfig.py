import json
import os
import tempfile
import unittest

from src.utils.errors import ConfigError
from src.utils.RunConfig import RunConfig


class TestRunConfig(unittest.TestCase):

    def setUp(self):
        handle, self.file_path = tempfile.mkstemp(suffix=".json")
        os.close(handle)
        # Create a test JSON configuration file
        with open(self.file_path, "w") as f:
            json.dump({"scorers": [{"name": "verbalized", "settings": {"scale": "percent"}}],
                       "aggregator": "mean",
                       "metrics": {"recall_target": 0.8}}, f)
        self.config = RunConfig(self.file_path)

    def tearDown(self):
        # Delete the test JSON configuration file
        os.remove(self.file_path)

    def test_get_existing_key(self):
        self.assertEqual(self.config.get("aggregator"), "mean")
        self.assertEqual(self.config.get("metrics.recall_target"), 0.8)

    def test_defaults_survive_partial_sections(self):
        self.assertEqual(self.config.get("metrics.ece_bins"), 10)
        self.assertEqual(self.config.get("judge.retry_limit"), 2)

    def test_get_nonexistent_key(self):
        self.assertIsNone(self.config.get("nonexistent_key"))
        self.assertIsNone(self.config.get("metrics.nonexistent_key"))

    def test_set_existing_key(self):
        self.assertTrue(self.config.set_param("metrics.ece_bins", 15))
        self.assertEqual(self.config.get("metrics.ece_bins"), 15)

    def test_set_key_in_unknown_section(self):
        with self.assertRaises(ConfigError) as caught:
            self.config.set_param("nowhere.key", 1)
        self.assertEqual(caught.exception.field_path, "nowhere.key")

    def test_get_all_is_a_copy(self):
        everything = self.config.get_all()
        everything["aggregator"] = "noisy_or"
        self.assertEqual(self.config.get("aggregator"), "mean")

    def test_delete_existing_key(self):
        self.assertTrue(self.config.delete_key("metrics.recall_target"))
        self.assertIsNone(self.config.get("metrics.recall_target"))

    def test_delete_nonexistent_key(self):
        self.assertFalse(self.config.delete_key("nonexistent_key"))

    def test_create_key(self):
        self.assertTrue(self.config.create_key("inputs.sidecar", "x.logits.bin"))
        self.assertEqual(self.config.get("inputs.sidecar"), "x.logits.bin")

    def test_overrides_and_command_line(self):
        config = RunConfig(self.file_path, overrides=["metrics.ece_bins=20", "aggregator=noisy_or"],
                           command_line_args={"workers": 3, "labels": "answer"})
        self.assertEqual(config.get("metrics.ece_bins"), 20)
        self.assertEqual(config.get("aggregator"), "noisy_or")
        self.assertEqual(config.get("workers"), 3)
        self.assertEqual(config.get("metrics.labels"), "answer")

    def test_schema_violation_names_field(self):
        with self.assertRaises(ConfigError) as caught:
            RunConfig(self.file_path, overrides=["metrics.recall_target=1.5"])
        self.assertEqual(caught.exception.field_path, "metrics.recall_target")

    def test_hash_changes_iff_config_changes(self):
        same = RunConfig(self.file_path)
        self.assertEqual(same.config_hash(), self.config.config_hash())
        changed = RunConfig(self.file_path, overrides=["seed=1"])
        self.assertNotEqual(changed.config_hash(), self.config.config_hash())

    def test_hash_ignores_worker_count(self):
        one = RunConfig(self.file_path, command_line_args={"workers": 1})
        many = RunConfig(self.file_path, command_line_args={"workers": 32})
        self.assertEqual(one.config_hash(), many.config_hash())

    def test_validate(self):
        self.assertTrue(self.config.validate())
        self.config.set_param("scorers", [])
        with self.assertRaises(ConfigError):
            self.config.validate()
        self.config.set_param("inputs.traces", ["/does/not/exist.jsonl"])
        with self.assertRaises(ConfigError) as caught:
            self.config.validate(require_scorers=False)
        self.assertEqual(caught.exception.field_path, "inputs.traces.0")


if __name__ == '__main__':
    unittest.main()

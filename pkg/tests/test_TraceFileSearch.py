import os
import shutil
import tempfile
import unittest

from src.utils.errors import ConfigError
from src.utils.TraceFileSearch import TraceFileSearch, resolve_trace_paths


class TestTraceFileSearch(unittest.TestCase):
    def setUp(self):
        """
        Method that runs before each test method to set up the test environment
        """
        self.test_dir = tempfile.mkdtemp()
        os.mkdir(os.path.join(self.test_dir, "branch"))
        self.file1_path = os.path.join(self.test_dir, "b.jsonl")
        self.file2_path = os.path.join(self.test_dir, "branch", "a.jsonl")
        self.other_path = os.path.join(self.test_dir, "notes.txt")
        for path in (self.file1_path, self.file2_path, self.other_path):
            with open(path, "w") as f:
                f.write("\n")

    def tearDown(self):
        """
        Method that runs after each test method to clean up the test environment
        """
        shutil.rmtree(self.test_dir)

    def test_traverse_directory(self):
        files = TraceFileSearch(self.test_dir).traverse_directory()
        self.assertEqual(files, sorted([self.file1_path, self.file2_path]))

    def test_traverse_missing_directory(self):
        self.assertEqual(TraceFileSearch(os.path.join(self.test_dir, "missing")).traverse_directory(), [])

    def test_get_file_properties(self):
        properties = TraceFileSearch(self.test_dir).get_file_properties(self.file1_path)
        self.assertEqual(properties["file_name"], "b.jsonl")
        self.assertEqual(properties["file_size"], 1)
        self.assertIsNone(TraceFileSearch(self.test_dir).get_file_properties(os.path.join(self.test_dir, "x")))

    def test_resolve_mixed_paths(self):
        resolved = resolve_trace_paths([self.other_path, self.test_dir])
        self.assertEqual(resolved[0], self.other_path)
        self.assertEqual(resolved[1:], sorted([self.file1_path, self.file2_path]))

    def test_resolve_missing_path(self):
        with self.assertRaises(ConfigError):
            resolve_trace_paths([os.path.join(self.test_dir, "missing.jsonl")])


if __name__ == '__main__':
    unittest.main()

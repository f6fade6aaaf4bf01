import json
import random
import threading
import time
import unittest
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from src.judge.JudgeClient import (JudgeClient, JudgeConfig, judge_label,
                                   judge_score, label_trace_steps)
from src.judge.PromptTemplates import render_history, render_judge_prompt
from src.scorers.JudgeScorer import JudgeScorer
from src.utils.errors import (JudgeUnavailable, JudgeUnparseable,
                              LabelUnparseable, ScorerError)
from tests.traceFixtures import make_trace


class StubJudge:
    """
    Scripted chat-completions endpoint. Each reply is (status, content); the last one repeats.
    """

    def __init__(self, replies, delay=0.0):
        self.replies = list(replies)
        self.delay = delay
        self.requests = []
        self.in_flight = 0
        self.max_in_flight = 0
        self.lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                with stub.lock:
                    stub.in_flight += 1
                    stub.max_in_flight = max(stub.max_in_flight, stub.in_flight)
                    stub.requests.append({"path": self.path, "body": body,
                                          "authorization": self.headers.get("Authorization")})
                    status, content = stub.replies.pop(0) if len(stub.replies) > 1 else stub.replies[0]
                time.sleep(stub.delay)
                payload = json.dumps({"choices": [{"message": {"role": "assistant", "content": content}}]})
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload.encode())
                with stub.lock:
                    stub.in_flight -= 1

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def endpoint(self):
        return f"http://127.0.0.1:{self.server.server_address[1]}/v1"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


class JudgeTestCase(unittest.TestCase):

    def start(self, replies, delay=0.0, **settings):
        self.stub = StubJudge(replies, delay)
        self.addCleanup(self.stub.close)
        settings.setdefault("backoff", 0.0)
        return JudgeConfig.from_settings(dict(settings, endpoint=self.stub.endpoint), token="secret")


class TestJudgeScore(JudgeTestCase):

    def setUp(self):
        self.trace = make_trace("t", n=3)

    def test_confidence_reply(self):
        config = self.start([(200, "Confidence: 0.9")])
        failure, transcript = judge_score(config, self.trace, "step", 2)
        self.assertAlmostEqual(failure, 0.1)
        self.assertEqual(transcript.attempts, 1)
        request = self.stub.requests[0]
        self.assertEqual(request["path"], "/v1/chat/completions")
        self.assertEqual(request["body"]["temperature"], 0)
        self.assertEqual(request["authorization"], "Bearer secret")

    def test_retries_server_errors(self):
        config = self.start([(500, ""), (500, ""), (200, "Confidence: 0.5")], retry_limit=2)
        failure, transcript = judge_score(config, self.trace, "response")
        self.assertAlmostEqual(failure, 0.5)
        self.assertEqual(transcript.attempts, 3)

    def test_retry_limit_exhausted(self):
        config = self.start([(503, "")], retry_limit=1)
        with self.assertRaises(JudgeUnavailable) as caught:
            judge_score(config, self.trace, "response")
        self.assertEqual(caught.exception.transcript.attempts, 2)

    def test_client_error_is_not_retried(self):
        config = self.start([(401, "")], retry_limit=3)
        with self.assertRaises(JudgeUnavailable):
            judge_score(config, self.trace, "response")
        self.assertEqual(len(self.stub.requests), 1)

    def test_unparseable(self):
        config = self.start([(200, "I think it is probably fine.")], retry_limit=1)
        with self.assertRaises(JudgeUnparseable):
            judge_score(config, self.trace, "step", 1)
        # one re-ask with the strict instruction
        self.assertEqual(len(self.stub.requests), 2)
        self.assertEqual(len(self.stub.requests[1]["body"]["messages"]), 4)

    def test_reask_recovers(self):
        config = self.start([(200, "fine"), (200, "Confidence: 0.25")])
        failure, transcript = judge_score(config, self.trace, "step", 3)
        self.assertAlmostEqual(failure, 0.75)
        self.assertEqual(transcript.attempts, 2)

    def test_percent_scale(self):
        config = self.start([(200, "Confidence: 70")], scale="percent")
        failure, _ = judge_score(config, self.trace, "step", 1)
        self.assertAlmostEqual(failure, 0.3)

    def test_concurrency_bound(self):
        config = self.start([(200, "Confidence: 0.5")], delay=0.01, max_concurrency=3)
        traces = [make_trace(f"t{k:03d}", n=1) for k in range(100)]
        with JudgeClient(config) as client:
            results = client.judge_many([(t, "step", 1) for t in traces])
        self.assertEqual(len(results), 100)
        self.assertLessEqual(self.stub.max_in_flight, 3)
        self.assertEqual(len(self.stub.requests), 100)


class TestJudgeLabel(JudgeTestCase):

    def test_labels(self):
        config = self.start([(200, "CORRECT"), (200, "INCORRECT")])
        self.assertEqual(judge_label(config, "4", "4", "2+2"), 0)
        self.assertEqual(judge_label(config, "5", "4", "2+2"), 1)

    def test_unparseable_label(self):
        config = self.start([(200, "maybe")])
        with self.assertRaises(LabelUnparseable):
            judge_label(config, "5", "4", "2+2")

    def test_label_trace_steps_skips_steps_without_gold(self):
        config = self.start([(200, "INCORRECT")])
        trace = make_trace("t", n=2, gold=["g1", None])
        self.assertEqual(label_trace_steps(config, trace), {1: 1})


class TestPrompts(unittest.TestCase):

    def test_step_prompt_is_causal(self):
        trace = make_trace("t", n=3)
        prompt = render_judge_prompt(trace, "step", 2)
        for text in ("Q1 of t", "R1 of t", "Q2 of t", "R2 of t"):
            self.assertIn(text, prompt)
        self.assertNotIn("Q3 of t", prompt)
        self.assertNotIn("R3 of t", prompt)

    def test_response_prompt(self):
        trace = make_trace("t", n=1, context="The context")
        prompt = render_judge_prompt(trace, "response")
        for text in ("The context", "Q1 of t", "R1 of t"):
            self.assertIn(text, prompt)

    def test_step_index_out_of_range(self):
        with self.assertRaises(ScorerError):
            render_judge_prompt(make_trace("t", n=3), "step", 4)

    def test_histories_extend_each_other(self):
        rng = random.Random(3)
        for k in range(50):
            n = rng.randint(1, 8)
            trace = make_trace(f"t{k}", n=n)
            for i in range(2, n + 1):
                self.assertTrue(render_history(trace, i).startswith(render_history(trace, i - 1)))
                prompt = render_judge_prompt(trace, "step", i)
                for j in range(i + 1, n + 1):
                    self.assertNotIn(f"Q{j} of t{k}", prompt)
                    self.assertNotIn(f"R{j} of t{k}", prompt)

    def test_rendering_is_deterministic(self):
        trace = make_trace("t", n=4)
        self.assertEqual(render_judge_prompt(trace, "step", 3), render_judge_prompt(trace, "step", 3))


class TestJudgeScorer(JudgeTestCase):

    def test_one_call_per_step(self):
        config = self.start([(200, "Confidence: 0.8")])
        scorer = JudgeScorer({"endpoint": config.endpoint, "backoff": 0.0})
        traces = [make_trace("a", n=3), make_trace("b", n=2)]
        results = scorer.score_traces(traces, "step")
        scorer.close()
        self.assertEqual(len(self.stub.requests), 5)
        self.assertEqual(len(results["a"].per_step), 3)
        self.assertEqual(results["b"].diagnostics["template_source"], "toolkit-defined")

    def test_response_granularity(self):
        config = self.start([(200, "Confidence: 0.8")])
        scorer = JudgeScorer({"endpoint": config.endpoint, "backoff": 0.0})
        results = scorer.score_traces([make_trace("a", n=3)], "response")
        scorer.close()
        self.assertEqual(len(self.stub.requests), 1)
        self.assertAlmostEqual(results["a"].whole, 0.2)


if __name__ == '__main__':
    unittest.main()

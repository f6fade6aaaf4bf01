# *************************************************************************************************************************
#   JudgeClient.py
#       Client for external LLM evaluators reached through an OpenAI-compatible chat-completions endpoint.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       config = JudgeConfig.from_settings(run_config.get('judge'))
#       with JudgeClient(config) as client:
#           failure, transcript = client.judge_score(trace, "step", step_index=2)
#           label = client.judge_label(response, gold, context)
#
#   Design Notes:
#   -.  POST <endpoint>/chat/completions with model, messages and temperature 0; 'Authorization: Bearer <token>'
#       with the token taken from STEPGUARD_JUDGE_TOKEN.
#   -.  Transport errors, HTTP 429 and 5xx are retried with exponential backoff; other 4xx fail at once.
#   -.  An unparseable reply is re-asked once with a stricter instruction. Every HTTP call counts as an attempt,
#       and attempts never exceed retry_limit + 1.
#   -.  A bounded semaphore caps the requests in flight at max_concurrency, whatever the caller's thread count.
#   -.  Batched results are keyed by (trace id, step index) so completion order never matters.
# *************************************************************************************************************************

import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import requests

from config.DEFAULTS import DEFAULT_JUDGE_CONFIG, JUDGE_TOKEN_ENV
from src.judge.PromptTemplates import (render_judge_prompt,
                                       render_label_prompt, strict_text,
                                       system_text)
from src.scorers.VerbalizedScorer import SCALES, parse_verbalized
from src.utils.errors import (ConfigError, JudgeError, JudgeUnavailable,
                              JudgeUnparseable, LabelUnparseable, ParseMissing)
from src.utils.helperFunctions import err_to_str

logger = logging.getLogger(__name__)

LABEL_TOKENS = {"CORRECT": 0, "INCORRECT": 1}


@dataclass(frozen=True)
class JudgeConfig:
    endpoint: str
    model: str
    token: Optional[str] = None
    max_concurrency: int = DEFAULT_JUDGE_CONFIG['max_concurrency']
    retry_limit: int = DEFAULT_JUDGE_CONFIG['retry_limit']
    timeout: float = DEFAULT_JUDGE_CONFIG['timeout']
    backoff: float = DEFAULT_JUDGE_CONFIG['backoff']
    template: str = DEFAULT_JUDGE_CONFIG['template']
    label_template: str = DEFAULT_JUDGE_CONFIG['label_template']
    scale: str = DEFAULT_JUDGE_CONFIG['scale']

    def __post_init__(self):
        if self.max_concurrency < 1:
            raise ConfigError("max_concurrency must be >= 1", field_path="judge.max_concurrency")
        if self.retry_limit < 0:
            raise ConfigError("retry_limit must be >= 0", field_path="judge.retry_limit")
        if not self.timeout > 0:
            raise ConfigError("timeout must be > 0", field_path="judge.timeout")
        if self.scale not in SCALES:
            raise ConfigError(f"unknown scale '{self.scale}'", field_path="judge.scale")

    @classmethod
    def from_settings(cls, settings=None, token=None):
        merged = dict(DEFAULT_JUDGE_CONFIG)
        merged.update(settings or {})
        if token is None:
            token = os.environ.get(JUDGE_TOKEN_ENV) or None
        return cls(token=token, **merged)


@dataclass
class JudgeTranscript:
    prompt: str
    raw_reply: Optional[str] = None
    score: Optional[float] = None
    parse_error: Optional[str] = None
    attempts: int = 0
    latency: float = 0.0
    key: Optional[tuple] = None
    history: list = field(default_factory=list)

    def to_dict(self):
        return {
            "prompt": self.prompt, "raw_reply": self.raw_reply, "score": self.score,
            "parse_error": self.parse_error, "attempts": self.attempts, "latency": self.latency,
        }


class _RetryableReply(Exception):
    pass


class JudgeClient:
    def __init__(self, config):
        self.config = config
        self._in_flight = threading.BoundedSemaphore(config.max_concurrency)
        self._local = threading.local()
        self._sessions = []
        self._sessions_lock = threading.Lock()
        self.call_count = 0
        self._count_lock = threading.Lock()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        with self._sessions_lock:
            for session in self._sessions:
                session.close()
            self._sessions = []

    # -------------------------------------------------------------------------
    # transport
    # -------------------------------------------------------------------------

    def _session(self):
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            if self.config.token:
                session.headers["Authorization"] = f"Bearer {self.config.token}"
            self._local.session = session
            with self._sessions_lock:
                self._sessions.append(session)
        return session

    def _post(self, messages):
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        payload = {"model": self.config.model, "messages": messages, "temperature": 0}
        with self._count_lock:
            self.call_count += 1
        try:
            with self._in_flight:
                response = self._session().post(url, json=payload, timeout=self.config.timeout)
        except requests.RequestException as e:
            raise _RetryableReply(f"transport error: {err_to_str(e)}")

        if response.status_code == 429 or response.status_code >= 500:
            raise _RetryableReply(f"HTTP {response.status_code}")
        if response.status_code >= 400:
            raise JudgeUnavailable(f"judge endpoint refused the request: HTTP {response.status_code}")
        try:
            return response.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise _RetryableReply(f"malformed completion body: {err_to_str(e)}")

    def _converse(self, prompt, system, strict, parse, unparseable_error, key=None):
        """
        Send a prompt, retrying transport failures and re-asking once on an unparseable reply.
        """
        transcript = JudgeTranscript(prompt=prompt, key=key)
        messages = [{"role": "system", "content": system}, {"role": "user", "content": prompt}]
        reasked = False
        last_failure = None
        started = time.monotonic()

        while transcript.attempts <= self.config.retry_limit:
            if transcript.attempts > 0 and last_failure == "transport":
                time.sleep(self.config.backoff * (2 ** (transcript.attempts - 1)))
            transcript.attempts += 1
            try:
                reply = self._post(messages)
            except _RetryableReply as e:
                last_failure = "transport"
                transcript.history.append(str(e))
                logger.debug("Judge attempt %d for %s failed: %s", transcript.attempts, key, e)
                continue
            except JudgeUnavailable as e:
                transcript.latency = time.monotonic() - started
                e.transcript = transcript
                raise

            transcript.raw_reply = reply
            transcript.history.append(reply)
            try:
                transcript.score = parse(reply)
                transcript.parse_error = None
                transcript.latency = time.monotonic() - started
                return transcript
            except (ParseMissing, ValueError) as e:
                last_failure = "parse"
                transcript.parse_error = err_to_str(e)
                if reasked:
                    break
                reasked = True
                messages = messages + [{"role": "assistant", "content": reply}, {"role": "user", "content": strict}]

        transcript.latency = time.monotonic() - started
        if last_failure == "parse":
            raise unparseable_error(f"judge reply could not be parsed after {transcript.attempts} attempt(s)",
                                    transcript=transcript)
        raise JudgeUnavailable(f"judge endpoint unavailable after {transcript.attempts} attempt(s): "
                               f"{transcript.history[-1] if transcript.history else ''}", transcript=transcript)

    # -------------------------------------------------------------------------
    # operations
    # -------------------------------------------------------------------------

    def judge_score(self, trace, granularity, step_index=None):
        prompt = render_judge_prompt(trace, granularity, step_index, self.config.template, self.config.scale)
        transcript = self._converse(
            prompt, system_text(self.config.template), strict_text(self.config.template, self.config.scale),
            lambda reply: parse_verbalized(reply, self.config.scale), JudgeUnparseable, key=(trace.id, step_index))
        return transcript.score, transcript

    def judge_label(self, response, gold, context):
        if gold is None:
            raise ValueError("judge_label needs a gold response")
        prompt = render_label_prompt(response, gold, context, self.config.label_template)
        transcript = self._converse(
            prompt, system_text(self.config.label_template), strict_text(self.config.label_template),
            parse_label_reply, LabelUnparseable)
        return int(transcript.score)

    def judge_many(self, requests_):
        """
        Run judge_score for every (trace, granularity, step_index) request through the bounded pool.

        Returns {(trace id, step index): (failure, transcript) or JudgeError}.
        """
        def run(request):
            trace, granularity, step_index = request
            try:
                return (trace.id, step_index), self.judge_score(trace, granularity, step_index)
            except JudgeError as e:
                return (trace.id, step_index), e

        with ThreadPoolExecutor(max_workers=self.config.max_concurrency, thread_name_prefix="judge") as pool:
            return dict(pool.map(run, list(requests_)))


def parse_label_reply(reply):
    token = (reply or "").strip().strip(".!\"'`*").strip().upper()
    if token not in LABEL_TOKENS:
        raise ValueError(f"expected CORRECT or INCORRECT, got {reply!r}")
    return LABEL_TOKENS[token]


def judge_score(config, trace, granularity, step_index=None):
    with JudgeClient(config) as client:
        return client.judge_score(trace, granularity, step_index)


def judge_label(config, response, gold, context):
    with JudgeClient(config) as client:
        return client.judge_label(response, gold, context)


def label_trace_steps(config, trace):
    """
    Label every step carrying a gold response; returns {step index: label}. Steps without gold are left out.
    """
    labels = {}
    with JudgeClient(config) as client:
        for index, step in enumerate(trace.steps, start=1):
            if step.gold_response is None:
                continue
            labels[index] = client.judge_label(step.response, step.gold_response, trace.context)
    return labels

"""LLM providers: a deterministic rule-driven mock and an HTTP chat endpoint.

A provider takes a :class:`BatchRequest` and returns the raw completion
text. The harness owns parsing, so the mock goes through the same wire
format as a live model.
"""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import httpx

from gexprobe.errors import ProviderUnavailable
from gexprobe.llm_harness.parsing import DetectionResult
from gexprobe.obfuscator import ObfuscatedCase
from gexprobe.pattern_rules import PatternKind, RuleSignal

log = logging.getLogger(__name__)

MOCK_CONFIDENCE = 80
MOCK_WHO = "dealers with negative gamma exposure"
MOCK_WHOM = "directional traders"
MOCK_WHAT = "forced pro-cyclical hedging amplifying moves"
# forced-choice answer when no rule fired: detected, but below the Mechanical cut
MOCK_FORCED_CONFIDENCE = 40


@dataclass(frozen=True)
class BatchRequest:
    prompt: str
    case_ids: tuple[str, ...]
    focus: PatternKind | None = None
    repair: bool = False
    allows_null: bool = True


class Provider(Protocol):
    name: str
    model: str

    def complete(self, request: BatchRequest) -> str: ...


def mock_agent(case: ObfuscatedCase, signals: Sequence[RuleSignal], *, allows_null: bool = True,
               focus: PatternKind | None = None) -> DetectionResult:
    """Detect exactly when a rule fired; the first triggered pattern in enum order wins.

    When the template forbids a null answer and nothing fired, the mock
    still names a pattern (the focus, else the first in enum order) at a
    confidence below the Mechanical threshold.
    """
    fired = sorted((s.kind for s in signals if s.triggered), key=lambda k: k.order)
    if not fired:
        if allows_null:
            return DetectionResult(case.case_id, False, None, "", "", "", 0, None)
        return DetectionResult(case.case_id, True, focus or list(PatternKind)[0], MOCK_WHO, MOCK_WHOM, MOCK_WHAT,
                               MOCK_FORCED_CONFIDENCE, "T+1")
    return DetectionResult(case.case_id, True, fired[0], MOCK_WHO, MOCK_WHOM, MOCK_WHAT,
                           MOCK_CONFIDENCE, "T+1")


def _wire_entry(result: DetectionResult) -> dict:
    d = result.to_dict()
    return {k: d[k] for k in ("case_id", "detected", "pattern", "who", "whom", "what", "confidence", "horizon")}


class MockAgent:
    """Answers from rule signals looked up by case id, never from the prompt text.

    ``signals`` maps case id to the signals of the case's final session.
    With a focus pattern, only that pattern's signal is considered.
    """

    name = "mock"
    model = "rule-mock"

    def __init__(self, cases: Mapping[str, ObfuscatedCase], signals: Mapping[str, Sequence[RuleSignal]]):
        self.cases = dict(cases)
        self.signals = dict(signals)
        self.calls = 0

    def complete(self, request: BatchRequest) -> str:
        self.calls += 1
        entries = []
        for cid in request.case_ids:
            sigs = self.signals.get(cid, ())
            if request.focus is not None:
                sigs = [s for s in sigs if s.kind is request.focus]
            entries.append(_wire_entry(mock_agent(self.cases[cid], sigs, allows_null=request.allows_null,
                                                  focus=request.focus)))
        return json.dumps({"results": entries}, sort_keys=True)


@dataclass(frozen=True)
class AgentConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model_name: str = "gpt-4o"
    batch_size: int = 10
    max_in_flight: int = 1
    max_attempts: int = 3
    backoff_base: float = 1.0
    timeout: float = 120.0
    temperature: float = 0.0
    api_key_env: str = "GEXPROBE_API_KEY"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


SYSTEM_MESSAGE = ("You analyze options market structure. Answer only with the JSON object requested "
                  "by the user message.")


class HttpAgent:
    """OpenAI-compatible chat-completions client.

    Request body: ``{"model", "temperature", "messages": [system, user]}``.
    The completion text is ``choices[0].message.content``. Transport errors,
    HTTP 429 and 5xx are retried with exponential backoff; other 4xx fail at
    once.
    """

    name = "http"

    def __init__(self, config: AgentConfig, *, client: httpx.Client | None = None, sleep=time.sleep):
        self.config = config
        self.model = config.model_name
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleep

    def _headers(self):
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def request_body(self, request: BatchRequest) -> dict:
        return {
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": SYSTEM_MESSAGE},
                {"role": "user", "content": request.prompt},
            ],
        }

    def complete(self, request: BatchRequest) -> str:
        cfg = self.config
        last = None
        for attempt in range(cfg.max_attempts):
            if attempt:
                self._sleep(cfg.backoff_base * 2 ** (attempt - 1))
            try:
                resp = self._client.post(cfg.endpoint, json=self.request_body(request), headers=self._headers())
            except httpx.HTTPError as exc:
                last = f"transport error: {exc}"
                log.warning("attempt %d/%d: %s", attempt + 1, cfg.max_attempts, last)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                log.warning("attempt %d/%d: %s", attempt + 1, cfg.max_attempts, last)
                continue
            if resp.status_code >= 400:
                raise ProviderUnavailable(f"HTTP {resp.status_code} from {cfg.endpoint}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                # an unusable envelope is the model's problem, not the transport's
                return resp.text
        raise ProviderUnavailable(f"{cfg.endpoint} unavailable after {cfg.max_attempts} attempts ({last})")

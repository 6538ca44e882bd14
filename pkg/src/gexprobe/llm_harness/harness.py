"""Batched detection runs with a send-time leak gate and a resumable journal."""
from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from gexprobe.errors import LeakDetected, ParseFailure
from gexprobe.llm_harness.agents import BatchRequest, Provider
from gexprobe.llm_harness.parsing import DetectionResult, parse_batch
from gexprobe.llm_harness.templates import PromptTemplate, render_batch
from gexprobe.obfuscator import DEFAULT_LEAK_RULES, LeakRules, ObfuscatedCase, leak_audit
from gexprobe.pattern_rules import PatternKind
from gexprobe.thresholds import DEFAULT_THRESHOLDS, Thresholds

log = logging.getLogger(__name__)

REPAIR_NOTE = ("\n\nYour previous answer for this case could not be used: {error}. "
               "Reply again with only the JSON object described above.")


class LeakInterceptor:
    """Wraps a provider and re-audits every prompt right before it is sent."""

    def __init__(self, provider: Provider, rules: LeakRules = DEFAULT_LEAK_RULES):
        self.provider = provider
        self.rules = rules
        self.name = provider.name
        self.model = provider.model
        self.sent = 0

    def complete(self, request: BatchRequest) -> str:
        report = leak_audit(request.prompt, self.rules)
        if not report.clean:
            raise LeakDetected(report, "send-time audit")
        self.sent += 1
        return self.provider.complete(request)


class DetectionJournal:
    """Append-only JSONL of finished results, keyed by (case id, framing).

    Results are appended as soon as they exist so an interrupted run can be
    resumed; appends are serialized through one lock.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.done: dict[tuple[str, str], DetectionResult] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    r = DetectionResult.from_dict(json.loads(line))
                    self.done[r.key] = r

    def append(self, result: DetectionResult) -> None:
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(result.to_dict(), sort_keys=True) + "\n")
            self.done[result.key] = result


def batches(items: Sequence, size: int) -> list[list]:
    if size < 1:
        raise ValueError("batch size must be >= 1")
    return [list(items[i:i + size]) for i in range(0, len(items), size)]


def _run_one_batch(batch, template, agent, focus, thresholds, rules):
    prompt = render_batch(batch, template, focus=focus, thresholds=thresholds, rules=rules)
    completion = agent.complete(BatchRequest(prompt, tuple(c.case_id for c in batch), focus,
                                             allows_null=template.allows_null_detection))
    parsed = parse_batch(completion, [c.case_id for c in batch], allows_null=template.allows_null_detection)
    out = []
    for case in batch:
        res = parsed[case.case_id]
        if isinstance(res, ParseFailure):
            res = _repair(case, template, agent, focus, thresholds, rules, res)
        out.append(res.with_framing(focus))
    return out


def _repair(case, template, agent, focus, thresholds, rules, failure):
    log.info("case %s: %s; retrying with a repair request", case.case_id, failure)
    prompt = render_batch([case], template, focus=focus, thresholds=thresholds, rules=rules)
    prompt += REPAIR_NOTE.format(error=str(failure).replace("{", "(").replace("}", ")"))
    completion = agent.complete(BatchRequest(prompt, (case.case_id,), focus, repair=True,
                                             allows_null=template.allows_null_detection))
    res = parse_batch(completion, [case.case_id], allows_null=template.allows_null_detection)[case.case_id]
    if isinstance(res, ParseFailure):
        log.warning("case %s: parse failure after repair: %s", case.case_id, res)
        return DetectionResult.failed(case.case_id, f"ParseFailure: {res}")
    return res


def run_batch(cases: Sequence[ObfuscatedCase], template: PromptTemplate, agent: Provider, *,
              batch_size: int = 10, max_in_flight: int = 1, focus: PatternKind | None = None,
              journal: DetectionJournal | None = None, thresholds: Thresholds = DEFAULT_THRESHOLDS,
              rules: LeakRules = DEFAULT_LEAK_RULES) -> list[DetectionResult]:
    """Exactly one result per case, in input order.

    Cases already in ``journal`` are not re-sent. A case whose answer stays
    malformed after one repair request gets a failed result (detected=False,
    ``error`` set) and the run continues; provider outages and leaks abort.
    """
    if not isinstance(agent, LeakInterceptor):
        agent = LeakInterceptor(agent, rules)
    fkey = focus.value if focus else ""
    pending = [c for c in cases if journal is None or (c.case_id, fkey) not in journal.done]
    done: dict[str, DetectionResult] = {}
    if journal is not None:
        done.update({cid: r for (cid, fk), r in journal.done.items() if fk == fkey})

    groups = batches(pending, batch_size)
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = [pool.submit(_run_one_batch, g, template, agent, focus, thresholds, rules) for g in groups]
        # collected in submission order: journal order is deterministic
        for fut in futures:
            for res in fut.result():
                done[res.case_id] = res
                if journal is not None:
                    journal.append(res)
    return [done[c.case_id] for c in cases]

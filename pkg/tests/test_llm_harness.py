import json
from dataclasses import replace
from datetime import date

import httpx
import pytest

from conftest import profile, synthetic_cases
from gexprobe.errors import LeakDetected, ParseFailure, ProviderUnavailable, UnfilledPlaceholder
from gexprobe.llm_harness import (BIASED, UNBIASED, AgentConfig, BatchRequest, Classification, DetectionJournal,
                                  DetectionResult, HttpAgent, LeakInterceptor, MockAgent, PromptTemplate, batches,
                                  classify, mock_agent, parse_batch, parse_response, read_detections,
                                  render_batch, render_prompt, run_batch, write_detections)
from gexprobe.llm_harness.agents import MOCK_FORCED_CONFIDENCE
from gexprobe.llm_harness.templates import REGIME_WORDS, fill, format_billions
from gexprobe.obfuscator import TemplateKind, obfuscate
from gexprobe.pattern_rules import PatternKind, evaluate_all

D = date(2024, 1, 16)


def case_for(p=None, **kw):
    p = p or profile(net_gex=-32.9e9, call_gex=1e9, put_gex=-33.9e9)
    return obfuscate([(D, p)], **kw)


def entry(cid, **kw):
    e = {"case_id": cid, "detected": True, "pattern": "gamma_positioning", "who": "dealers", "whom": "traders",
         "what": "sell into declines", "confidence": 83, "horizon": "T+1"}
    e.update(kw)
    return e


# --- templates ------------------------------------------------------------------

def test_unbiased_rendering():
    text = render_prompt(case_for(), UNBIASED)
    assert "Day T+0" in text and "-$32.9B" in text
    assert "Do you detect any structural market mechanics?" in text
    assert not any(w.lower() in text.lower() for w in REGIME_WORDS)


def test_biased_rendering_has_one_label_and_hint():
    c = case_for(template=TemplateKind.BIASED, hint=["gamma_positioning"])
    text = render_prompt(c, BIASED)
    assert text.count("NEGATIVE_GAMMA") == 1
    assert "rule-based screening flagged gamma_positioning" in text


def test_leaky_case_never_renders():
    c = case_for()
    leaky = replace(c, index_alias="SPY")
    with pytest.raises(LeakDetected):
        render_prompt(leaky, UNBIASED)


def test_fill_rejects_missing_placeholder():
    with pytest.raises(UnfilledPlaceholder):
        fill("{{a}} {{b}}", {"a": "x"})


def test_template_invariants():
    assert UNBIASED.allows_null_detection and not BIASED.allows_null_detection
    with pytest.raises(ValueError):
        PromptTemplate(TemplateKind.UNBIASED, "NEGATIVE_GAMMA {{cases}}", "{{days}}", True)
    with pytest.raises(ValueError):
        PromptTemplate(TemplateKind.BIASED, "{{cases}}", "{{days}}", False)


@pytest.mark.parametrize("x,s", [(-32.9e9, "-$32.9B"), (5e9, "$5.0B"), (-0.04e9, "$0.0B"), (-19.87e9, "-$19.9B")])
def test_format_billions(x, s):
    assert format_billions(x) == s


def test_framing_sentence_by_focus():
    c = case_for()
    a = render_batch([c], UNBIASED, focus=PatternKind.STOCK_PINNING)
    b = render_batch([c], UNBIASED)
    assert a != b and len(a) > len(b)


# --- parsing --------------------------------------------------------------------

def test_parse_mechanical_and_boundary():
    assert parse_response(entry("a", confidence=83)).classification is Classification.MECHANICAL
    assert parse_response(entry("a", confidence=59)).classification is Classification.NON_MECHANICAL
    assert parse_response(entry("a", confidence=60)).mechanical


def test_parse_rejects_missing_who():
    with pytest.raises(ParseFailure):
        parse_response(entry("a", who=""))
    with pytest.raises(ParseFailure):
        parse_response({k: v for k, v in entry("a").items() if k != "who"})


def test_parse_clamps_confidence(caplog):
    assert parse_response(entry("a", confidence=140)).confidence == 100
    assert "clamped" in caplog.text


def test_parse_ignores_model_classification():
    r = parse_response(entry("a", confidence=20, classification="Mechanical"))
    assert r.classification is Classification.NON_MECHANICAL


def test_null_detection_rules():
    r = parse_response({"case_id": "a", "detected": False, "confidence": 30})
    assert r.confidence == 0 and r.pattern is None
    with pytest.raises(ParseFailure):
        parse_response({"case_id": "a", "detected": False, "confidence": 0}, allows_null=False)


@pytest.mark.parametrize("bad", [{"detected": "yes"}, {"confidence": "high"}, {"horizon": "T+5"},
                                 {"pattern": "momentum"}, {"confidence": 50.5}])
def test_parse_schema_errors(bad):
    with pytest.raises(ParseFailure):
        parse_response(entry("a", **bad))


def test_first_json_object_in_prose():
    text = 'Sure! Here you go: {"results": [' + json.dumps(entry("a")) + ']} Hope that helps {"x": 1}'
    assert parse_batch(text, ["a"])["a"].confidence == 83


def test_parse_batch_per_case_failure():
    out = parse_batch(json.dumps({"results": [entry("a"), entry("b", who="")]}), ["a", "b", "c"])
    assert isinstance(out["a"], DetectionResult)
    assert isinstance(out["b"], ParseFailure) and isinstance(out["c"], ParseFailure)


def test_classification_is_pure_function():
    for c in range(101):
        assert classify(c) is (Classification.MECHANICAL if c >= 60 else Classification.NON_MECHANICAL)


def test_detections_round_trip(tmp_path):
    rs = [parse_response(entry("a")).with_framing(PatternKind.STOCK_PINNING), DetectionResult.failed("b", "boom")]
    write_detections(tmp_path / "d.jsonl", rs)
    assert read_detections(tmp_path / "d.jsonl") == rs


# --- mock agent -------------------------------------------------------------------

def test_mock_zero_dte_case():
    p = profile(min_dte=0, net_gex=-3.5e9, call_gamma_concentration=0.8, flip_point=None)
    r = mock_agent(case_for(p), evaluate_all(p))
    assert r.pattern is PatternKind.ZERO_DTE_HEDGING and r.confidence == 80 and "dealers" in r.who


def test_mock_no_signal_and_tie_break():
    quiet = profile(net_gex=1e8, flip_point=None)
    r = mock_agent(case_for(quiet), evaluate_all(quiet))
    assert not r.detected and r.confidence == 0
    both = profile(min_dte=0, net_gex=-3.5e9, call_gamma_concentration=0.8)
    sigs = evaluate_all(both)
    assert sum(s.triggered for s in sigs) == 2
    assert mock_agent(case_for(both), sigs).pattern is PatternKind.GAMMA_POSITIONING


def test_mock_forced_choice_is_below_threshold():
    quiet = profile(net_gex=1e8, flip_point=None)
    r = mock_agent(case_for(quiet), evaluate_all(quiet), allows_null=False, focus=PatternKind.STOCK_PINNING)
    assert r.detected and r.pattern is PatternKind.STOCK_PINNING
    assert r.confidence == MOCK_FORCED_CONFIDENCE and not r.mechanical


# --- harness -----------------------------------------------------------------------

class Recorder:
    name, model = "rec", "rec"

    def __init__(self, inner):
        self.inner = inner
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        return self.inner.complete(request)


def _mock(cases, signals):
    return MockAgent({c.case_id: c for c in cases}, signals)


def test_batches_ceiling_division():
    assert [len(b) for b in batches(list(range(25)), 10)] == [10, 10, 5]


def test_run_batch_order_and_calls():
    _, _, cases, signals = synthetic_cases()
    rec = Recorder(_mock(cases[:25], signals))
    out = run_batch(cases[:25], UNBIASED, rec)
    assert [r.case_id for r in out] == [c.case_id for c in cases[:25]]
    assert [len(r.case_ids) for r in rec.requests] == [10, 10, 5]


def test_parallel_run_matches_serial():
    _, _, cases, signals = synthetic_cases()
    a = run_batch(cases[:60], UNBIASED, _mock(cases, signals), max_in_flight=1)
    b = run_batch(cases[:60], UNBIASED, _mock(cases, signals), max_in_flight=4, batch_size=7)
    assert a == b


def test_mock_rate_equals_rule_rate():
    _, _, cases, signals = synthetic_cases()
    out = run_batch(cases, UNBIASED, _mock(cases, signals))
    fired = sum(any(s.triggered for s in signals[c.case_id]) for c in cases)
    assert sum(r.mechanical for r in out) == fired


def test_unbiased_and_biased_same_ids():
    _, _, cases, signals = synthetic_cases()
    _, _, bcases, bsignals = synthetic_cases(template="biased")
    a = run_batch(cases[:30], UNBIASED, _mock(cases, signals))
    b = run_batch(bcases[:30], BIASED, _mock(bcases, bsignals))
    assert sorted(r.case_id for r in a) == sorted(r.case_id for r in b)
    assert all(r.error is None for r in b)


class Scripted:
    name, model = "scripted", "scripted"

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        reply = self.replies.pop(0)
        return reply(request) if callable(reply) else reply


def test_repair_then_success():
    c1, c2 = case_for(), obfuscate([(date(2024, 1, 17), profile())])
    first = json.dumps({"results": [entry(c1.case_id), entry(c2.case_id, who="")]})
    second = json.dumps({"results": [entry(c2.case_id, confidence=70)]})
    agent = Scripted([first, second])
    out = run_batch([c1, c2], UNBIASED, agent)
    assert [r.confidence for r in out] == [83, 70]
    assert agent.requests[1].repair and agent.requests[1].case_ids == (c2.case_id,)


def test_repair_twice_gives_failure_and_continues():
    c1, c2 = case_for(), obfuscate([(date(2024, 1, 17), profile())])
    agent = Scripted(["not json", "still not json", "nope"])
    out = run_batch([c1, c2], UNBIASED, agent)
    assert all(r.error and "ParseFailure" in r.error and not r.detected for r in out)
    assert len(agent.requests) == 3


def test_interceptor_blocks_leaky_prompt():
    agent = Scripted(["{}"])
    gate = LeakInterceptor(agent)
    with pytest.raises(LeakDetected):
        gate.complete(BatchRequest("Friday SPY flows", ("a",)))
    assert agent.requests == [] and gate.sent == 0


def test_journal_resume(tmp_path):
    _, _, cases, signals = synthetic_cases()
    path = tmp_path / "j.jsonl"
    first = run_batch(cases[:10], UNBIASED, _mock(cases, signals), journal=DetectionJournal(path))
    rec = Recorder(_mock(cases, signals))
    both = run_batch(cases[:20], UNBIASED, rec, journal=DetectionJournal(path))
    assert both[:10] == first
    assert sum(len(r.case_ids) for r in rec.requests) == 10
    assert len(path.read_text().splitlines()) == 20


# --- HTTP provider --------------------------------------------------------------------

def _client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_http_agent_request_and_parse(monkeypatch):
    monkeypatch.setenv("GEXPROBE_API_KEY", "k-123")
    seen = {}

    def handler(req):
        seen["body"] = json.loads(req.content)
        seen["auth"] = req.headers.get("authorization")
        return httpx.Response(200, json={"choices": [{"message": {"content": "hello"}}]})

    agent = HttpAgent(AgentConfig(endpoint="https://llm.test/v1"), client=_client(handler))
    assert agent.complete(BatchRequest("prompt", ("a",))) == "hello"
    assert seen["auth"] == "Bearer k-123"
    assert seen["body"]["temperature"] == 0.0 and seen["body"]["messages"][1]["content"] == "prompt"


def test_http_agent_retries_then_gives_up():
    calls, sleeps = [], []

    def handler(req):
        calls.append(1)
        return httpx.Response(503)

    agent = HttpAgent(AgentConfig(endpoint="https://llm.test/v1", max_attempts=3, backoff_base=0.5),
                      client=_client(handler), sleep=sleeps.append)
    with pytest.raises(ProviderUnavailable):
        agent.complete(BatchRequest("p", ("a",)))
    assert len(calls) == 3 and sleeps == [0.5, 1.0]


def test_http_agent_recovers_after_429():
    replies = [httpx.Response(429), httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})]
    agent = HttpAgent(AgentConfig(endpoint="https://llm.test/v1"), client=_client(lambda r: replies.pop(0)),
                      sleep=lambda s: None)
    assert agent.complete(BatchRequest("p", ("a",))) == "ok"


def test_http_agent_client_error_is_fatal():
    agent = HttpAgent(AgentConfig(endpoint="https://llm.test/v1"), client=_client(lambda r: httpx.Response(401)),
                      sleep=lambda s: None)
    with pytest.raises(ProviderUnavailable):
        agent.complete(BatchRequest("p", ("a",)))


def test_http_end_to_end_through_harness():
    c = case_for()

    def handler(req):
        return httpx.Response(200, json={"choices": [{"message": {"content": json.dumps(
            {"results": [entry(c.case_id, confidence=91)]})}}]})

    agent = HttpAgent(AgentConfig(endpoint="https://llm.test/v1"), client=_client(handler))
    assert run_batch([c], UNBIASED, agent)[0].confidence == 91


def test_agent_config_validation():
    with pytest.raises(ValueError):
        AgentConfig(batch_size=0)
    with pytest.raises(ValueError):
        AgentConfig(max_in_flight=0)


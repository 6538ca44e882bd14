from __future__ import annotations

import sys
from datetime import date, timedelta
from pathlib import Path

import pytest

from gexprobe import kernels
from gexprobe.gex_engine import GexProfile, Regime
from gexprobe.market_data import ChainSnapshot, OptionContract, OptionKind

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"
AS_OF = date(2024, 3, 1)


@pytest.fixture(params=kernels.available_backends())
def backend(request, monkeypatch):
    """Run the test once per compiled/fallback kernel."""
    monkeypatch.setattr(kernels, "_impl", kernels.get_backend(request.param))
    return request.param


def contract(strike, kind="C", oi=1000, iv=0.2, dte=30, gamma=None, as_of=AS_OF):
    return OptionContract(float(strike), as_of + timedelta(days=dte), OptionKind(kind), int(oi), float(iv),
                          gamma, 1.0, 1.1)


def chain(spot, contracts, as_of=AS_OF, ticker="SPY"):
    return ChainSnapshot(as_of, ticker, float(spot), tuple(contracts))


def profile(**kw):
    base = dict(as_of=AS_OF, net_gex=-2.5e9, call_gex=1e9, put_gex=-3.5e9, spot=500.0, flip_point=505.0,
                call_gamma_concentration=0.75, top_strike_oi_share=0.5, top_strike=500.0,
                regime=Regime.NEGATIVE, min_dte=10)
    base.update(kw)
    return GexProfile(**base)


def random_chain(rng, max_contracts=10, spot=None):
    """Small random chain; ``rng`` is a numpy Generator."""
    spot = float(spot or rng.uniform(50, 600))
    n = int(rng.integers(1, max_contracts + 1))
    cs = []
    for _ in range(n):
        cs.append(contract(round(spot * rng.uniform(0.85, 1.15), 2), rng.choice(["C", "P"]),
                           int(rng.integers(0, 50_000)), float(rng.uniform(0.08, 0.8)),
                           int(rng.integers(0, 120))))
    return chain(spot, cs)


def flip_chain(rng, spot=100.0):
    """Calls above spot, puts below, with a random OI balance: a flip may or may not exist."""
    cs = []
    for _ in range(int(rng.integers(1, 4))):
        cs.append(contract(round(spot * rng.uniform(1.0, 1.12), 1), "C", int(rng.integers(100, 5000)),
                           float(rng.uniform(0.12, 0.35)), int(rng.integers(5, 60))))
        cs.append(contract(round(spot * rng.uniform(0.88, 1.0), 1), "P", int(rng.integers(100, 5000)),
                           float(rng.uniform(0.12, 0.35)), int(rng.integers(5, 60))))
    return chain(spot, cs)


_CORPUS = {}


def synthetic_cases(days=242, regime="Alternating", seed=3, template="unbiased"):
    """Obfuscated one-day cases over a synthetic year, memoized per argument set."""
    key = (days, regime, seed, template)
    if key not in _CORPUS:
        from gexprobe.gex_engine import compute_gex
        from gexprobe.obfuscator import obfuscate
        from gexprobe.pattern_rules import evaluate_all
        from gexprobe.synth_market import ScenarioSpec, generate
        res = generate(ScenarioSpec(days=days, regime=regime, seed=seed))
        profs = [compute_gex(s) for s in res.snapshots]
        cases, signals = [], {}
        for p in profs:
            fired = [s for s in evaluate_all(p)]
            hint = [s.kind.value for s in fired if s.triggered] if template == "biased" else None
            c = obfuscate([(p.as_of, p)], template=template, hint=hint)
            cases.append(c)
            signals[c.case_id] = fired
        _CORPUS[key] = (res, profs, cases, signals)
    return _CORPUS[key]


def load_funnel_fixture():
    import csv
    from gexprobe.llm_harness.parsing import read_detections
    from gexprobe.outcome_engine import read_outcomes_csv
    detections = read_detections(FIXTURES / "funnel_detections.jsonl")
    outcomes = read_outcomes_csv(FIXTURES / "funnel_outcomes.csv")
    with (FIXTURES / "funnel_dates.csv").open(newline="") as fh:
        dates = {r["case_id"]: date.fromisoformat(r["date"]) for r in csv.DictReader(fh)}
    return detections, outcomes, dates


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[n])

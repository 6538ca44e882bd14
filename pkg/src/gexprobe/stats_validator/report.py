"""Aggregate scorecard over detections, outcomes and GEX profiles."""
from __future__ import annotations

import csv
import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from gexprobe.errors import OutcomeError, SingularDesign, StatsError
from gexprobe.gex_engine import GexProfile, Regime
from gexprobe.llm_harness.parsing import DetectionResult
from gexprobe.market_data import UnderlyingBar
from gexprobe.outcome_engine import (TRADING_DAYS, VOL_WINDOW, BarIndex, MaterializationMode, OutcomeRecord,
                                     accuracy, forward_metrics)
from gexprobe.pattern_rules import PatternKind
from gexprobe.stats_validator.alpha import TC_PER_TRADE, AlphaInputs, net_alpha
from gexprobe.stats_validator.inference import (RateEstimate, binomial_test, bonferroni, exact_power,
                                                power_analysis, rate_estimate)
from gexprobe.stats_validator.resampling import BootstrapResult, bootstrap_rate
from gexprobe.stats_validator.timeseries import Differencing, granger, pearson
from gexprobe.stats_validator.trend import cochran_armitage

DEFAULT_POWER_TARGETS = ((0.70, 0.50, 0.05, 0.80), (0.70, 0.50, 0.05, 0.95))
ALPHA_STRATEGY = "abs_next_day_move"


@dataclass(frozen=True)
class PatternStats:
    pattern: str
    detection: RateEstimate | None
    accuracy: float | None
    p_value: float | None
    bonferroni_alpha: float
    significant: bool


@dataclass(frozen=True)
class Funnel:
    tests: int
    detections: int
    evaluable: int      # detections with a complete outcome window
    materialized: int
    detection_rate: float | None
    accuracy: float | None
    overall_success: float | None


@dataclass(frozen=True)
class QuarterSlice:
    quarter: str
    days: int
    tests: int
    detections: int
    detection_rate: float | None
    accuracy: float | None
    mean_return: float | None
    net_alpha: float | None


@dataclass
class StatsReport:
    days: int
    mode: str
    per_pattern: list[PatternStats]
    funnel: Funnel
    quarterly: list[QuarterSlice] = field(default_factory=list)
    trend_test_p: float | None = None
    trend_test_z: float | None = None
    bootstrap: BootstrapResult | None = None
    power: list[dict] = field(default_factory=list)
    granger: list[dict] = field(default_factory=list)
    pearson: dict | None = None
    materialization: dict = field(default_factory=dict)
    regime_distribution: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def check_invariants(self) -> None:
        f = self.funnel
        if not f.tests >= f.detections >= f.materialized:
            raise StatsError("funnel counts increase through a stage")
        for ps in self.per_pattern:
            d = ps.detection
            if d is not None and not d.ci_low <= d.rate <= d.ci_high:
                raise StatsError(f"{ps.pattern}: CI does not contain the point estimate")
            if ps.significant and not (ps.p_value is not None and ps.p_value < ps.bonferroni_alpha):
                raise StatsError(f"{ps.pattern}: flagged significant without passing the corrected level")
        for v in (f.detection_rate, f.accuracy, f.overall_success):
            if v is not None and not 0 <= v <= 1:
                raise StatsError("rate outside [0, 1]")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, date):
        return obj.isoformat()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def quarter_of(d: date) -> str:
    return f"{d.year}Q{(d.month - 1) // 3 + 1}"


def _pattern_of(det: DetectionResult) -> PatternKind | None:
    return det.framing if det.framing is not None else det.pattern


def _per_pattern(detections, outcomes, days, mode, alpha, p0):
    framed = any(d.framing is not None for d in detections)
    adj = bonferroni(alpha, len(PatternKind))
    out = []
    for kind in PatternKind:
        if framed:
            subset = [d for d in detections if d.framing is kind]
        else:
            subset = [d for d in detections if d.pattern is kind]
        k = sum(d.mechanical for d in subset)
        if days == 0:
            out.append(PatternStats(kind.value, None, None, None, adj, False))
            continue
        p = binomial_test(k, days, p0)
        out.append(PatternStats(kind.value, rate_estimate(k, days), accuracy(outcomes, subset, mode), p, adj,
                                p < adj))
    return out


def _funnel(detections, outcomes, mode) -> Funnel:
    by_key = {r.key: r for r in outcomes}
    tests = len(detections)
    mech = [d for d in detections if d.mechanical]
    complete = [by_key[d.key] for d in mech if d.key in by_key and by_key[d.key].complete]
    mat = sum(r.materialized(mode) for r in complete)
    rate = len(mech) / tests if tests else None
    acc = mat / len(complete) if complete else None
    overall = rate * acc if rate is not None and acc is not None else None
    return Funnel(tests, len(mech), len(complete), mat, rate, acc, overall)


def next_day_returns(bars: Sequence[UnderlyingBar]) -> dict[date, float]:
    b = sorted(bars, key=lambda x: x.date)
    return {b[i].date: b[i + 1].close / b[i].close - 1.0 for i in range(len(b) - 1)}


def trailing_realized_vol(bars: Sequence[UnderlyingBar], window: int = VOL_WINDOW) -> dict[date, float]:
    """Annualized sample stdev of the ``window`` log returns ending at each date."""
    b = sorted(bars, key=lambda x: x.date)
    logs = [math.log(b[i].close / b[i - 1].close) for i in range(1, len(b))]
    out = {}
    for i in range(window, len(b)):
        w = logs[i - window:i]
        m = sum(w) / window
        out[b[i].date] = math.sqrt(sum((v - m) ** 2 for v in w) / (window - 1) * TRADING_DAYS)
    return out


def _quarterly(detections, outcomes, case_dates, mode, returns, tc):
    groups: dict[str, list[DetectionResult]] = defaultdict(list)
    for d in detections:
        groups[quarter_of(case_dates[d.case_id])].append(d)
    slices = []
    for q in sorted(groups):
        dets = groups[q]
        day_ids = {d.case_id for d in dets}
        mech_days = sorted({case_dates[d.case_id] for d in dets if d.mechanical})
        mech = sum(d.mechanical for d in dets)
        # one position per detection day, however many patterns fired on it
        strat = [returns[x] for x in mech_days if x in returns] if returns else []
        bench = [returns[case_dates[c]] for c in sorted(day_ids) if returns and case_dates[c] in returns]
        mean_ret = sum(strat) / len(strat) if strat else None
        alpha = None
        if strat and bench:
            alpha = net_alpha(AlphaInputs([abs(r) for r in strat], bench, tc))
        slices.append(QuarterSlice(q, len(day_ids), len(dets), mech, mech / len(dets), accuracy(outcomes, dets, mode),
                                   mean_ret, alpha))
    return slices


def _materialization(detections, outcomes):
    by_key = {r.key: r for r in outcomes}
    recs = [by_key[d.key] for d in detections if d.mechanical and d.key in by_key and by_key[d.key].complete]
    names = ("c1_vol_amplification", "c2_direction", "c3_strike_convergence", "c4_range_expansion",
             "materialized_strict", "materialized_broad")
    table = {"evaluable": len(recs)}
    for name in names:
        table[name] = sum(getattr(r, name) for r in recs) / len(recs) if recs else None
    return table


def _regimes(profiles, detections, case_dates):
    by_date = {p.as_of: p.regime for p in profiles}
    days = Counter(p.regime.value for p in profiles)
    dets = Counter()
    for d in detections:
        if d.mechanical and case_dates and case_dates.get(d.case_id) in by_date:
            dets[by_date[case_dates[d.case_id]].value] += 1
    return {r.value: {"days": days.get(r.value, 0), "detections": dets.get(r.value, 0)} for r in Regime}


def _granger_table(profiles, bars, lags):
    vol = trailing_realized_vol(bars)
    pts = [(p.net_gex, vol[p.as_of]) for p in sorted(profiles, key=lambda p: p.as_of) if p.as_of in vol]
    x = [a for a, _ in pts]
    y = [b for _, b in pts]
    rows = []
    for diff in Differencing:
        for lag in lags:
            row = {"specification": diff.value, "lag": lag, "n": len(pts)}
            try:
                g = granger(x, y, lag, diff)
            except (ValueError, SingularDesign, StatsError) as exc:
                row.update(f_stat=None, p_value=None, significant=None, error=str(exc))
            else:
                row.update(f_stat=g.f_stat, p_value=g.p_value, significant=g.significant(), error=None)
            rows.append(row)
    return rows


def _pearson_negative(profiles, bars):
    idx = BarIndex(bars)
    xs, ys = [], []
    for p in sorted(profiles, key=lambda p: p.as_of):
        if p.regime is not Regime.NEGATIVE:
            continue
        try:
            m = forward_metrics(idx, p.as_of)
        except OutcomeError:
            continue
        xs.append(p.net_gex)
        ys.append(m.realized_vol_5d)
    try:
        res = pearson(xs, ys)
    except (ValueError, StatsError) as exc:
        return {"regime": Regime.NEGATIVE.value, "r": None, "p_value": None, "n": len(xs), "error": str(exc)}
    return {"regime": Regime.NEGATIVE.value, "r": res.r, "p_value": res.p_value, "n": res.n, "error": None}


def build_report(detections: Iterable[DetectionResult], outcomes: Iterable[OutcomeRecord] = (), *,
                 case_dates: Mapping[str, date] | None = None, profiles: Sequence[GexProfile] = (),
                 bars: Sequence[UnderlyingBar] = (), mode: MaterializationMode = MaterializationMode.STRICT,
                 alpha: float = 0.05, p0: float = 0.5, bootstrap_iterations: int = 10_000,
                 bootstrap_seed: int = 0, tc_per_trade: float = TC_PER_TRADE,
                 power_targets=DEFAULT_POWER_TARGETS, granger_lags=range(1, 6)) -> StatsReport:
    """Every optional input enables its own sections; missing ones leave them empty."""
    detections = list(detections)
    outcomes = list(outcomes)
    mode = MaterializationMode(mode)
    days = len({d.case_id for d in detections})

    report = StatsReport(days=days, mode=mode.value,
                         per_pattern=_per_pattern(detections, outcomes, days, mode, alpha, p0),
                         funnel=_funnel(detections, outcomes, mode))
    report.settings = {"alpha": alpha, "p0": p0, "tc_per_trade": tc_per_trade,
                       "alpha_strategy": ALPHA_STRATEGY, "bonferroni_m": len(PatternKind)}
    report.materialization = _materialization(detections, outcomes)

    if detections:
        report.bootstrap = bootstrap_rate([d.mechanical for d in detections], bootstrap_iterations, bootstrap_seed)

    for p1, base, a, target in power_targets:
        res = power_analysis(p1, base, a, target)
        report.power.append({"p1": p1, "p0": base, "alpha": a, "target_power": target, "n_exact": res.n_exact,
                             "critical_value": res.critical_value, "achieved_power": res.achieved_power,
                             "n_normal_approx": res.n_normal})
    f = report.funnel
    if f.detection_rate is not None and f.detection_rate > p0 and days:
        pw, c = exact_power(days, f.detection_rate, p0, alpha)
        report.power.append({"p1": f.detection_rate, "p0": p0, "alpha": alpha, "target_power": None,
                             "n_exact": days, "critical_value": c, "achieved_power": pw, "n_normal_approx": None})

    if case_dates is not None and detections:
        returns = next_day_returns(bars) if bars else {}
        report.quarterly = _quarterly(detections, outcomes, case_dates, mode, returns, tc_per_trade)
        if len(report.quarterly) >= 2:
            tr = cochran_armitage([(q.detections, q.tests) for q in report.quarterly])
            report.trend_test_p, report.trend_test_z = tr.p_value, tr.z

    if profiles:
        report.regime_distribution = _regimes(profiles, detections, case_dates)
        if bars:
            report.granger = _granger_table(profiles, bars, granger_lags)
            report.pearson = _pearson_negative(profiles, bars)

    report.check_invariants()
    return report


def write_report(out_dir, report: StatsReport) -> Path:
    """``report.json`` plus one CSV per table under ``report_tables/``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = report.to_dict()
    path = out / "report.json"
    path.write_text(json.dumps(d, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    tables = out / "report_tables"
    tables.mkdir(exist_ok=True)
    detection_rows = []
    for ps in d["per_pattern"]:
        det = ps["detection"] or {}
        detection_rows.append({"pattern": ps["pattern"], "detections": det.get("successes"), "days": det.get("n"),
                               "rate": det.get("rate"), "ci_low": det.get("ci_low"), "ci_high": det.get("ci_high"),
                               "accuracy": ps["accuracy"], "p_value": ps["p_value"],
                               "bonferroni_alpha": ps["bonferroni_alpha"], "significant": ps["significant"]})
    _write_table(tables / "detection.csv", detection_rows,
                 ["pattern", "detections", "days", "rate", "ci_low", "ci_high", "accuracy", "p_value",
                  "bonferroni_alpha", "significant"])
    _write_table(tables / "quarterly.csv", d["quarterly"], [f for f in QuarterSlice.__dataclass_fields__])
    _write_table(tables / "materialization.csv",
                 [{"criterion": k, "value": v} for k, v in sorted(d["materialization"].items())],
                 ["criterion", "value"])
    _write_table(tables / "granger.csv", d["granger"],
                 ["specification", "lag", "n", "f_stat", "p_value", "significant", "error"])
    _write_table(tables / "regime_distribution.csv",
                 [{"regime": k, **v} for k, v in d["regime_distribution"].items()],
                 ["regime", "days", "detections"])
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    return repr(v) if isinstance(v, float) else str(v)


def _write_table(path: Path, rows: list[dict], columns: list[str]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])

"""Forward-return outcomes and materialization flags for detections.

Returns are close-to-close on the underlying bars. Strict materialization
is C1 or C4 (T+1 move or T+1 range). Broad materialization checks the
criterion matching the detected pattern: C1 for gamma positioning, C3 for
pinning, C4 for 0DTE, and any of C1/C3/C4 when no pattern was named. C2
(direction follow-through) is reported but enters neither mode.
"""
from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, fields
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from gexprobe.errors import OutcomeError, TruncatedHorizon
from gexprobe.gex_engine import GexProfile
from gexprobe.llm_harness.parsing import DetectionResult
from gexprobe.market_data import UnderlyingBar, format_float
from gexprobe.pattern_rules import PatternKind
from gexprobe.thresholds import DEFAULT_THRESHOLDS, Thresholds

TRADING_DAYS = 252
HORIZON = 3
VOL_WINDOW = 5
# criteria compare values rounded to this many decimals, so a price sitting
# exactly on a decimal threshold (99.70 after 100.00) is not pushed over it
# by binary floating point
CRITERIA_DECIMALS = 12


class MaterializationMode(str, Enum):
    STRICT = "strict"
    BROAD = "broad"


@dataclass(frozen=True)
class ForwardMetrics:
    t0_return: float | None  # return into the detection session, if a prior bar exists
    t1_return: float
    t3_return: float
    t1_intraday_range: float
    realized_vol_5d: float
    max_gain_3d: float
    max_drawdown_3d: float
    close_t1: float


class BarIndex:
    """Date-sorted bars with O(log n) session lookup."""

    def __init__(self, bars: Sequence[UnderlyingBar]):
        self.bars = sorted(bars, key=lambda b: b.date)
        self.dates = [b.date for b in self.bars]

    def position(self, d: date) -> int:
        i = bisect.bisect_left(self.dates, d)
        if i == len(self.dates) or self.dates[i] != d:
            raise OutcomeError(f"no bar for detection date {d}")
        return i


def _as_index(bars) -> BarIndex:
    return bars if isinstance(bars, BarIndex) else BarIndex(bars)


def forward_metrics(bars, detection_date: date) -> ForwardMetrics:
    idx = _as_index(bars)
    p = idx.position(detection_date)
    b = idx.bars
    if p + HORIZON >= len(b):
        raise TruncatedHorizon(f"{detection_date}: only {len(b) - p - 1} session(s) after detection, "
                               f"need {HORIZON}")
    c0 = b[p].close
    closes = [b[p + k].close for k in range(1, HORIZON + 1)]
    rel = [c / c0 - 1.0 for c in closes]

    end = min(p + VOL_WINDOW, len(b) - 1)
    logs = [math.log(b[i].close / b[i - 1].close) for i in range(p + 1, end + 1)]
    mean = sum(logs) / len(logs)
    var = sum((x - mean) ** 2 for x in logs) / (len(logs) - 1)

    return ForwardMetrics(
        t0_return=(c0 / b[p - 1].close - 1.0) if p > 0 else None,
        t1_return=rel[0],
        t3_return=rel[-1],
        t1_intraday_range=(b[p + 1].high - b[p + 1].low) / c0,
        realized_vol_5d=math.sqrt(var) * math.sqrt(TRADING_DAYS),
        max_gain_3d=max(0.0, max(rel)),
        max_drawdown_3d=min(0.0, min(rel)),
        close_t1=closes[0],
    )


@dataclass(frozen=True)
class OutcomeRecord:
    case_id: str
    framing: PatternKind | None
    pattern: PatternKind | None
    complete: bool
    t1_return: float | None = None
    t3_return: float | None = None
    t1_intraday_range: float | None = None
    realized_vol_5d: float | None = None
    max_gain_3d: float | None = None
    max_drawdown_3d: float | None = None
    c1_vol_amplification: bool = False
    c2_direction: bool = False
    c3_strike_convergence: bool = False
    c4_range_expansion: bool = False
    materialized_strict: bool = False
    materialized_broad: bool = False

    @property
    def key(self) -> tuple[str, str]:
        return (self.case_id, self.framing.value if self.framing else "")

    @classmethod
    def incomplete(cls, detection: DetectionResult) -> OutcomeRecord:
        return cls(detection.case_id, detection.framing, detection.pattern, False)

    def materialized(self, mode: MaterializationMode) -> bool:
        if MaterializationMode(mode) is MaterializationMode.STRICT:
            return self.materialized_strict
        return self.materialized_broad


def _snap(x: float) -> float:
    return round(x, CRITERIA_DECIMALS)


def _broad(pattern, c1, c3, c4):
    if pattern is PatternKind.GAMMA_POSITIONING:
        return c1
    if pattern is PatternKind.STOCK_PINNING:
        return c3
    if pattern is PatternKind.ZERO_DTE_HEDGING:
        return c4
    return c1 or c3 or c4


def compute_outcomes(detection: DetectionResult, bars, detection_date: date, profile: GexProfile, *,
                     thresholds: Thresholds = DEFAULT_THRESHOLDS) -> OutcomeRecord:
    """Raises :class:`TruncatedHorizon` when fewer than 3 sessions follow ``detection_date``."""
    m = forward_metrics(bars, detection_date)
    t = thresholds
    c1 = _snap(abs(m.t1_return)) > t.c1_move
    c2 = m.t0_return is not None and m.t0_return * m.t1_return > 0
    c3 = (profile.top_strike is not None
          and _snap(abs(m.close_t1 / profile.top_strike - 1.0)) < t.c3_strike_distance)
    c4 = _snap(m.t1_intraday_range) > t.c4_range
    return OutcomeRecord(
        case_id=detection.case_id,
        framing=detection.framing,
        pattern=detection.pattern,
        complete=True,
        t1_return=m.t1_return,
        t3_return=m.t3_return,
        t1_intraday_range=m.t1_intraday_range,
        realized_vol_5d=m.realized_vol_5d,
        max_gain_3d=m.max_gain_3d,
        max_drawdown_3d=m.max_drawdown_3d,
        c1_vol_amplification=c1,
        c2_direction=c2,
        c3_strike_convergence=c3,
        c4_range_expansion=c4,
        materialized_strict=c1 or c4,
        materialized_broad=_broad(detection.pattern, c1, c3, c4),
    )


def score_detections(detections: Iterable[DetectionResult], bars, dates: dict[str, date],
                     profiles: dict[date, GexProfile], *,
                     thresholds: Thresholds = DEFAULT_THRESHOLDS) -> list[OutcomeRecord]:
    """Outcome per detection; end-of-sample detections become incomplete records."""
    idx = _as_index(bars)
    out = []
    for det in detections:
        d = dates[det.case_id]
        try:
            out.append(compute_outcomes(det, idx, d, profiles[d], thresholds=thresholds))
        except TruncatedHorizon:
            out.append(OutcomeRecord.incomplete(det))
    return out


def accuracy(records: Iterable[OutcomeRecord], detections: Iterable[DetectionResult],
             mode: MaterializationMode = MaterializationMode.STRICT) -> float | None:
    """Materialized share of Mechanical detections with a complete outcome; None when there are none."""
    by_key = {r.key: r for r in records}
    hits = total = 0
    for det in detections:
        if not det.mechanical:
            continue
        rec = by_key.get(det.key)
        if rec is None or not rec.complete:
            continue
        total += 1
        hits += rec.materialized(mode)
    if total == 0:
        return None
    return hits / total


_FIELDS = [f.name for f in fields(OutcomeRecord)]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, Enum):
        return v.value
    return str(v)


def write_outcomes_csv(path, records: Iterable[OutcomeRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_FIELDS)
        for r in records:
            w.writerow([_cell(getattr(r, name)) for name in _FIELDS])


def read_outcomes_csv(path) -> list[OutcomeRecord]:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for f in fields(OutcomeRecord):
                raw = row[f.name]
                if f.name == "case_id":
                    kw[f.name] = raw
                elif f.name in ("framing", "pattern"):
                    kw[f.name] = PatternKind(raw) if raw else None
                elif raw in ("true", "false"):
                    kw[f.name] = raw == "true"
                else:
                    kw[f.name] = float(raw) if raw else None
            out.append(OutcomeRecord(**kw))
    return out

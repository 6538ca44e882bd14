"""Rule-based detectors for the three dealer-constraint patterns.

All comparisons are strict. A criterion whose input is absent (no flip
point, no near-dated strikes) fails rather than raising.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple

from gexprobe.gex_engine import GexProfile
from gexprobe.market_data import format_float
from gexprobe.thresholds import DEFAULT_THRESHOLDS, Thresholds

SIGNALS_HEADER = ("date", "pattern", "triggered", "criterion", "value", "threshold", "passed")


class PatternKind(str, Enum):
    GAMMA_POSITIONING = "gamma_positioning"
    STOCK_PINNING = "stock_pinning"
    ZERO_DTE_HEDGING = "zero_dte_hedging"

    @property
    def order(self) -> int:
        return list(PatternKind).index(self)


class Criterion(NamedTuple):
    value: float | None
    threshold: float
    passed: bool


@dataclass(frozen=True)
class RuleSignal:
    kind: PatternKind
    triggered: bool
    details: dict

    @classmethod
    def from_criteria(cls, kind: PatternKind, details: dict) -> RuleSignal:
        return cls(kind, all(c.passed for c in details.values()), details)


def _less(value, threshold):
    return Criterion(value, threshold, value is not None and value < threshold)


def _greater(value, threshold):
    return Criterion(value, threshold, value is not None and value > threshold)


def _side_share(call_share, side):
    if call_share is None:
        return None
    return call_share if side == "call" else max(call_share, 1.0 - call_share)


def _distance(spot, level):
    return None if level is None else abs(spot / level - 1.0)


def detect_gamma_positioning(profile: GexProfile, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> RuleSignal:
    t = thresholds
    return RuleSignal.from_criteria(PatternKind.GAMMA_POSITIONING, {
        "net_gex": _less(profile.net_gex, t.gp_net_gex),
        "flip_distance": _less(_distance(profile.spot, profile.flip_point), t.gp_flip_distance),
        "gamma_concentration": _greater(
            _side_share(profile.call_gamma_concentration, t.gp_concentration_side), t.gp_concentration),
    })


def detect_stock_pinning(profile: GexProfile, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> RuleSignal:
    t = thresholds
    return RuleSignal.from_criteria(PatternKind.STOCK_PINNING, {
        "oi_share": _greater(profile.top_strike_oi_share, t.pin_oi_share),
        "strike_distance": _less(_distance(profile.spot, profile.top_strike), t.pin_strike_distance),
        "dte": _less(profile.min_dte, t.pin_max_dte),
    })


def detect_0dte(profile: GexProfile, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> RuleSignal:
    t = thresholds
    dte_ok = profile.min_dte == t.zdte_dte
    return RuleSignal.from_criteria(PatternKind.ZERO_DTE_HEDGING, {
        "dte": Criterion(profile.min_dte, t.zdte_dte, dte_ok),
        "net_gex_abs": _greater(abs(profile.net_gex), t.zdte_net_gex_abs),
        "gamma_concentration": _greater(
            _side_share(profile.call_gamma_concentration, t.zdte_concentration_side), t.zdte_concentration),
    })


DETECTORS = {
    PatternKind.GAMMA_POSITIONING: detect_gamma_positioning,
    PatternKind.STOCK_PINNING: detect_stock_pinning,
    PatternKind.ZERO_DTE_HEDGING: detect_0dte,
}


def evaluate_all(profile: GexProfile, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> list[RuleSignal]:
    """One signal per pattern, in enum order."""
    return [DETECTORS[k](profile, thresholds) for k in PatternKind]


def write_signals_csv(path, signals_by_date: Iterable[tuple[date, list[RuleSignal]]]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIGNALS_HEADER)
        for d, signals in sorted(signals_by_date, key=lambda x: x[0]):
            for s in signals:
                for name, c in s.details.items():
                    value = "" if c.value is None else format_float(c.value)
                    w.writerow([d.isoformat(), s.kind.value, str(s.triggered).lower(), name,
                                value, format_float(c.threshold), str(c.passed).lower()])


def read_signals_csv(path) -> dict[date, list[RuleSignal]]:
    raw: dict[date, dict[PatternKind, dict]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            d = date.fromisoformat(row["date"])
            kind = PatternKind(row["pattern"])
            value = float(row["value"]) if row["value"] else None
            crit = Criterion(value, float(row["threshold"]), row["passed"] == "true")
            raw.setdefault(d, {}).setdefault(kind, {})[row["criterion"]] = crit
    return {d: [RuleSignal.from_criteria(k, det) for k, det in sorted(by_kind.items(), key=lambda kv: kv[0].order)]
            for d, by_kind in sorted(raw.items())}

"""Seeded synthetic option chains and price paths with known regimes.

Each scenario builds its chains constructively so that the outcome of the
regime and pattern rules is known in advance, with at least a 10% margin
to every threshold. The generator then runs the real GEX engine and rule
detectors over its own output and refuses (``InfeasibleSpec``) to return
anything that disagrees with the ground truth.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from enum import Enum
from pathlib import Path

import numpy as np

from gexprobe.errors import InfeasibleSpec
from gexprobe.gex_engine import GreeksSource, Regime, compute_gex, effective_tte
from gexprobe.greeks import PricingInputs, bs_gamma
from gexprobe.market_data import (ChainSnapshot, OptionContract, OptionKind, UnderlyingBar, write_bars_file,
                                  write_chain_file)
from gexprobe.pattern_rules import PatternKind, evaluate_all
from gexprobe.thresholds import DEFAULT_THRESHOLDS, Thresholds

TRUTH_HEADER = ("date", "regime", "expected_pattern")
MARGIN = 0.10
FILLER_DTE = 45
MAX_OI = 50_000_000


class ScenarioRegime(str, Enum):
    PERSISTENT_NEGATIVE = "PersistentNegative"
    ALTERNATING = "Alternating"
    PINNED = "Pinned"
    ZERO_DTE_SPIKE = "ZeroDteSpike"
    FLAT = "Flat"


# per-day construction kinds; Alternating interleaves NEGATIVE and POSITIVE
_NEG, _POS, _PIN, _ZDTE, _FLAT = "negative", "positive", "pinned", "zdte", "flat"

_EXPECTED = {
    _NEG: (Regime.NEGATIVE, PatternKind.GAMMA_POSITIONING),
    _POS: (Regime.POSITIVE, None),
    _PIN: (Regime.NEUTRAL, PatternKind.STOCK_PINNING),
    _ZDTE: (Regime.POSITIVE, PatternKind.ZERO_DTE_HEDGING),
    _FLAT: (Regime.NEUTRAL, None),
}


def _default_oi_profile() -> dict:
    return {
        # net GEX targets for negative (and mirrored positive) days
        "target_mean": -19.87e9,
        "target_sd": 8.0e9,
        "target_low": -40.69e9,
        "target_high": -4.75e9,
        # negative-day layout: put below spot, call above, flip pinned between
        "put_offset": -0.01,
        "call_offset": 0.03,
        "flip_offset": 0.01,
        "directional_dte": 7,
        "directional_vol": 0.12,
        # pinning: share of near-dated OI on the pin strike
        "pin_share": 0.90,
        "pin_dte": 2,
        "pin_oi": 120_000,
        # 0DTE: net GEX multiple of the |GEX| threshold, OI shape over 5 strikes
        "zdte_multiple_low": 1.5,
        "zdte_multiple_high": 3.0,
        "zdte_weights": (0.15, 0.20, 0.30, 0.20, 0.15),
        # flat: far-dated near-symmetric straddles
        "flat_dte": 30,
        "flat_oi": 2_000,
        "flat_tilt": 0.02,
    }


@dataclass(frozen=True)
class ScenarioSpec:
    days: int
    regime: ScenarioRegime
    base_spot: float = 500.0
    vol: float = 0.15
    seed: int = 0
    strike_spacing: float = 1.0
    strike_span: float = 0.10
    oi_profile: dict = field(default_factory=_default_oi_profile)
    start: date = date(2024, 1, 2)
    ticker: str = "SPY"
    amplification: float = 1.5   # return-scale multiplier on sessions after negative-GEX days
    warmup: int = 5              # bar-only sessions before the first chain
    tail: int = 5                # bar-only sessions after the last chain

    def __post_init__(self):
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if self.strike_span < 0.10:
            raise ValueError("strike_span must cover at least +/-10% of spot")
        if self.strike_spacing <= 0 or self.base_spot <= 0 or self.vol <= 0:
            raise ValueError("spacing, spot and vol must be positive")
        object.__setattr__(self, "regime", ScenarioRegime(self.regime))
        merged = _default_oi_profile()
        merged.update(self.oi_profile)
        object.__setattr__(self, "oi_profile", merged)


@dataclass(frozen=True)
class TruthRow:
    date: date
    regime: Regime
    expected_pattern: PatternKind | None


@dataclass(frozen=True)
class SynthResult:
    snapshots: list[ChainSnapshot]
    bars: list[UnderlyingBar]
    truth: list[TruthRow]


def business_days(start: date, n: int) -> list[date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def _day_kinds(spec: ScenarioSpec) -> list[str]:
    r = spec.regime
    if r is ScenarioRegime.ALTERNATING:
        return [_NEG if i % 2 == 0 else _POS for i in range(spec.days)]
    single = {ScenarioRegime.PERSISTENT_NEGATIVE: _NEG, ScenarioRegime.PINNED: _PIN,
              ScenarioRegime.ZERO_DTE_SPIKE: _ZDTE, ScenarioRegime.FLAT: _FLAT}[r]
    return [single] * spec.days


def _gamma(spot, strike, dte, vol, as_of):
    tte = effective_tte(as_of, as_of + timedelta(days=dte))
    return bs_gamma(PricingInputs(spot, strike, tte, vol))


def _snap_strike(x: float, spacing: float) -> float:
    return round(round(x / spacing) * spacing, 10)


class _ChainBuilder:
    def __init__(self, spec: ScenarioSpec, as_of: date, spot: float):
        self.spec, self.as_of, self.spot = spec, as_of, spot
        self.loaded: dict[tuple, OptionContract] = {}

    def add(self, strike, kind, dte, oi, vol):
        if oi < 0:
            raise InfeasibleSpec(f"{self.as_of}: negative open interest {oi}")
        if oi > MAX_OI:
            raise InfeasibleSpec(f"{self.as_of}: open interest {oi} beyond {MAX_OI}")
        key = (strike, kind, dte)
        prev = self.loaded.get(key)
        total = oi + (prev.open_interest if prev else 0)
        self.loaded[key] = self._contract(strike, kind, dte, total, vol)

    def _contract(self, strike, kind, dte, oi, vol):
        expiry = self.as_of + timedelta(days=dte)
        g = bs_gamma(PricingInputs(self.spot, strike, effective_tte(self.as_of, expiry), vol))
        intrinsic = max(0.0, self.spot - strike) if kind is OptionKind.CALL else max(0.0, strike - self.spot)
        bid = round(intrinsic, 2)
        return OptionContract(strike, expiry, kind, int(oi), vol, g, bid, round(bid + 0.05, 2))

    def build(self) -> ChainSnapshot:
        s = self.spec
        lo = math.floor(self.spot * (1 - s.strike_span) / s.strike_spacing)
        hi = math.ceil(self.spot * (1 + s.strike_span) / s.strike_spacing)
        contracts = list(self.loaded.values())
        for i in range(lo, hi + 1):
            k = round(i * s.strike_spacing, 10)
            for kind in OptionKind:
                contracts.append(self._contract(k, kind, FILLER_DTE, 0, s.vol))
        return ChainSnapshot(self.as_of, s.ticker, self.spot, tuple(contracts))


def _directional_day(b: _ChainBuilder, target: float, sign: int) -> None:
    """Two-strike book whose net GEX at spot is ``target`` and crosses zero off spot.

    ``sign=-1`` puts the heavy put just below spot and a lighter call above
    it; ``sign=+1`` mirrors the layout so calls dominate.
    """
    p = b.spec.oi_profile
    spot, sp = b.spot, b.spec.strike_spacing
    dte, vol = p["directional_dte"], p["directional_vol"]
    near = _snap_strike(spot * (1 - sign * p["put_offset"]), sp)
    far = _snap_strike(spot * (1 - sign * p["call_offset"]), sp)
    flip = spot * (1 - sign * p["flip_offset"])
    # heavy leg near spot carries the sign of the target; far leg offsets it at the flip level
    heavy_kind = OptionKind.PUT if sign < 0 else OptionKind.CALL
    light_kind = OptionKind.CALL if sign < 0 else OptionKind.PUT
    g_near_f, g_far_f = _gamma(flip, near, dte, vol, b.as_of), _gamma(flip, far, dte, vol, b.as_of)
    g_near_s, g_far_s = _gamma(spot, near, dte, vol, b.as_of), _gamma(spot, far, dte, vol, b.as_of)
    if g_far_f <= 0:
        raise InfeasibleSpec(f"{b.as_of}: offset leg carries no gamma at the flip level")
    ratio = g_near_f / g_far_f            # light OI per unit of heavy OI
    per_unit = 100 * spot * spot * (g_near_s - ratio * g_far_s)
    if per_unit <= 0:
        raise InfeasibleSpec(f"{b.as_of}: layout cannot place the flip point at {flip:.2f}")
    heavy = round(abs(target) / per_unit)
    b.add(near, heavy_kind, dte, heavy, vol)
    b.add(far, light_kind, dte, round(heavy * ratio), vol)


def _pinned_day(b: _ChainBuilder) -> None:
    p = b.spec.oi_profile
    sp = b.spec.strike_spacing
    k0 = _snap_strike(b.spot, sp)
    total = p["pin_oi"]
    pin = round(total * p["pin_share"])
    side = (total - pin) // 2
    # equal call and put OI per strike: a straddle book is gamma-neutral
    for k, oi in ((k0, pin), (k0 - sp, side), (k0 + sp, side)):
        for kind in OptionKind:
            b.add(k, kind, p["pin_dte"], oi // 2, b.spec.vol)


def _zdte_day(b: _ChainBuilder, target: float) -> None:
    p = b.spec.oi_profile
    sp = b.spec.strike_spacing
    k0 = _snap_strike(b.spot, sp)
    weights = p["zdte_weights"]
    strikes = [k0 + (i - len(weights) // 2) * sp for i in range(len(weights))]
    per_unit = sum(w * 100 * b.spot ** 2 * _gamma(b.spot, k, 0, b.spec.vol, b.as_of)
                   for w, k in zip(weights, strikes))
    if per_unit <= 0:
        raise InfeasibleSpec(f"{b.as_of}: same-day strikes carry no gamma")
    scale = target / per_unit
    for w, k in zip(weights, strikes):
        b.add(k, OptionKind.CALL, 0, round(w * scale), b.spec.vol)


def _flat_day(b: _ChainBuilder) -> None:
    p = b.spec.oi_profile
    sp = b.spec.strike_spacing
    k0 = _snap_strike(b.spot, sp)
    for i in range(-3, 4):
        k = k0 + i * 5 * sp
        base = p["flat_oi"]
        b.add(k, OptionKind.PUT, p["flat_dte"], base, b.spec.vol)
        b.add(k, OptionKind.CALL, p["flat_dte"], round(base * (1 + p["flat_tilt"])), b.spec.vol)


def _targets(spec: ScenarioSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    p = spec.oi_profile
    draws = rng.normal(p["target_mean"], p["target_sd"], size=n)
    return np.clip(draws, p["target_low"], p["target_high"])


def _price_path(spec: ScenarioSpec, kinds: list[str], rng: np.random.Generator) -> list[UnderlyingBar]:
    n = spec.warmup + spec.days + spec.tail
    # warmup sessions end the business day before the first chain day
    pre = []
    d = spec.start - timedelta(days=1)
    while len(pre) < spec.warmup:
        if d.weekday() < 5:
            pre.append(d)
        d -= timedelta(days=1)
    dates = pre[::-1] + business_days(spec.start, spec.days + spec.tail)

    sd = spec.vol / math.sqrt(252)
    z = rng.standard_normal((n, 3))
    bars = []
    prev = spec.base_spot
    for i, d in enumerate(dates):
        day = i - spec.warmup
        # the session after a negative-GEX chain day moves with amplified scale
        amp = spec.amplification if 0 <= day - 1 < spec.days and kinds[day - 1] == _NEG else 1.0
        s = sd * amp
        if i == 0:
            close = spec.base_spot
        else:
            close = prev * math.exp(-0.5 * s * s + s * z[i, 0])
        close = round(close, 2)
        open_ = round(prev * math.exp(0.25 * s * z[i, 1]), 2) if i else close
        wick = abs(z[i, 2]) * 0.5 * s
        high = round(max(open_, close) * math.exp(wick), 2)
        low = round(min(open_, close) * math.exp(-wick), 2)
        bars.append(UnderlyingBar(d, open_, max(high, open_, close), min(low, open_, close), close))
        prev = close
    return bars


def _shifted(t: Thresholds, f: float) -> Thresholds:
    """Thresholds moved by the fraction ``f`` toward firing (negative: away from it)."""
    up, down = 1 + f, 1 - f
    return replace(t, gp_net_gex=t.gp_net_gex * down, gp_flip_distance=t.gp_flip_distance * up,
                   gp_concentration=t.gp_concentration * down, pin_oi_share=t.pin_oi_share * down,
                   pin_strike_distance=t.pin_strike_distance * up, zdte_net_gex_abs=t.zdte_net_gex_abs * down,
                   zdte_concentration=t.zdte_concentration * down)


def _verify(snapshots, truth, thresholds: Thresholds) -> None:
    """Check every day against truth, with MARGIN of slack on each threshold."""
    strict, loose = _shifted(thresholds, -MARGIN), _shifted(thresholds, MARGIN)
    for snap, row in zip(snapshots, truth):
        prof = compute_gex(snap, GreeksSource.RECOMPUTE, thresholds=thresholds)
        net = prof.net_gex
        if row.regime is Regime.NEGATIVE:
            ok = net < thresholds.regime_negative * (1 + MARGIN)
        elif row.regime is Regime.POSITIVE:
            ok = net > thresholds.regime_positive * (1 + MARGIN)
        else:
            ok = thresholds.regime_negative * (1 - MARGIN) < net < thresholds.regime_positive * (1 - MARGIN)
        if prof.regime is not row.regime or not ok:
            raise InfeasibleSpec(f"{snap.as_of}: built for {row.regime.value}, engine classifies "
                                 f"{prof.regime.value} (net {net:.4g}) or the margin is too thin")
        want = {row.expected_pattern} if row.expected_pattern else set()
        fired_strict = {s.kind for s in evaluate_all(prof, strict) if s.triggered}
        fired_loose = {s.kind for s in evaluate_all(prof, loose) if s.triggered}
        if not want <= fired_strict or fired_loose - want:
            raise InfeasibleSpec(f"{snap.as_of}: expected {sorted(k.value for k in want)}, rules fire "
                                 f"{sorted(k.value for k in fired_strict)} with tightened thresholds and "
                                 f"{sorted(k.value for k in fired_loose)} with loosened ones")


def generate(spec: ScenarioSpec, thresholds: Thresholds = DEFAULT_THRESHOLDS, *,
             verify: bool = True) -> SynthResult:
    """Chains, bars and truth labels; identical output for identical ``spec``."""
    rng = np.random.default_rng(spec.seed)
    kinds = _day_kinds(spec)
    bars = _price_path(spec, kinds, rng)
    targets = _targets(spec, rng, spec.days)
    p = spec.oi_profile
    zdte_mult = rng.uniform(p["zdte_multiple_low"], p["zdte_multiple_high"], size=spec.days)

    snapshots, truth = [], []
    for i, kind in enumerate(kinds):
        bar = bars[spec.warmup + i]
        b = _ChainBuilder(spec, bar.date, bar.close)
        if kind == _NEG:
            _directional_day(b, float(targets[i]), -1)
        elif kind == _POS:
            _directional_day(b, -float(targets[i]), +1)
        elif kind == _PIN:
            _pinned_day(b)
        elif kind == _ZDTE:
            _zdte_day(b, thresholds.zdte_net_gex_abs * float(zdte_mult[i]))
        else:
            _flat_day(b)
        snapshots.append(b.build())
        regime, pattern = _EXPECTED[kind]
        truth.append(TruthRow(bar.date, regime, pattern))

    if verify:
        _verify(snapshots, truth, thresholds)
    return SynthResult(snapshots, bars, truth)


def write_truth_csv(path, truth) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_HEADER)
        for row in truth:
            w.writerow([row.date.isoformat(), row.regime.value,
                        row.expected_pattern.value if row.expected_pattern else ""])


def read_truth_csv(path) -> list[TruthRow]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [TruthRow(date.fromisoformat(r["date"]), Regime(r["regime"]),
                         PatternKind(r["expected_pattern"]) if r["expected_pattern"] else None)
                for r in csv.DictReader(fh)]


def write_scenario(out_dir, result: SynthResult) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"chains": out / "chains.csv", "bars": out / "bars.csv", "truth": out / "truth.csv"}
    write_chain_file(paths["chains"], result.snapshots)
    write_bars_file(paths["bars"], result.bars)
    write_truth_csv(paths["truth"], result.truth)
    return paths

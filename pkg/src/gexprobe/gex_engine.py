"""Dealer dollar gamma exposure, flip point, concentration and regime.

Per contract, dollar GEX is ``gamma * OI * 100 * S**2``, with calls entering
positively and puts negatively (dealers short the puts customers buy).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from gexprobe import kernels
from gexprobe.errors import EmptyChain, MissingGamma
from gexprobe.greeks import SENTINEL_TTE, year_fraction
from gexprobe.market_data import ChainSnapshot, OptionKind, format_float
from gexprobe.thresholds import DEFAULT_THRESHOLDS, Thresholds

CONTRACT_MULTIPLIER = 100.0

GEX_HEADER = ("date", "net_gex", "call_gex", "put_gex", "spot", "flip_point", "call_conc",
              "top_oi_share", "regime", "min_dte", "top_strike")


class GreeksSource(str, Enum):
    VENDOR = "vendor"
    RECOMPUTE = "recompute"


class Regime(str, Enum):
    NEGATIVE = "Negative"
    NEUTRAL = "Neutral"
    POSITIVE = "Positive"


@dataclass(frozen=True)
class FlipGrid:
    """Hypothetical spot levels as fractions of the current spot."""
    lower: float = 0.90
    upper: float = 1.10
    points: int = 81

    def __post_init__(self):
        if not 0 < self.lower < 1 < self.upper:
            raise ValueError("grid must bracket the current spot")
        if self.points < 3:
            raise ValueError("grid needs at least 3 points")

    def levels(self, spot: float) -> np.ndarray:
        return np.linspace(self.lower * spot, self.upper * spot, self.points)

    def spacing(self, spot: float) -> float:
        return (self.upper - self.lower) * spot / (self.points - 1)


@dataclass(frozen=True)
class GexProfile:
    as_of: date
    net_gex: float
    call_gex: float
    put_gex: float
    spot: float
    flip_point: float | None
    call_gamma_concentration: float | None
    top_strike_oi_share: float | None
    top_strike: float | None
    regime: Regime
    min_dte: int
    per_strike_gex: dict = field(default_factory=dict, compare=False)
    ticker: str = ""


class Concentration(NamedTuple):
    call_gamma_concentration: float | None
    top_strike_oi_share: float | None
    top_strike: float | None


@dataclass(frozen=True)
class _ChainArrays:
    strikes: np.ndarray
    tte: np.ndarray
    iv: np.ndarray
    weights: np.ndarray  # signed open interest
    is_call: np.ndarray


def effective_tte(as_of: date, expiry: date) -> float:
    """Year fraction, floored at one trading hour for same-day expiries.

    An end-of-day snapshot of a same-day expiry still has to carry gamma for
    0DTE hedging to be visible at all.
    """
    t = year_fraction(as_of, expiry)
    return t if t > 0 else SENTINEL_TTE


def _arrays(snapshot: ChainSnapshot) -> _ChainArrays:
    cs = snapshot.contracts
    is_call = np.array([c.kind is OptionKind.CALL for c in cs], dtype=bool)
    oi = np.array([c.open_interest for c in cs], dtype=np.float64)
    return _ChainArrays(
        strikes=np.array([c.strike for c in cs], dtype=np.float64),
        tte=np.array([effective_tte(snapshot.as_of, c.expiry) for c in cs], dtype=np.float64),
        iv=np.array([c.implied_vol for c in cs], dtype=np.float64),
        weights=np.where(is_call, oi, -oi),
        is_call=is_call,
    )


def classify_regime(net_gex: float, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> Regime:
    if net_gex < thresholds.regime_negative:
        return Regime.NEGATIVE
    if net_gex > thresholds.regime_positive:
        return Regime.POSITIVE
    return Regime.NEUTRAL


def call_gamma_share(call_gex: float, put_gex: float) -> float | None:
    denom = call_gex + abs(put_gex)
    if denom <= 0:
        return None
    return call_gex / denom


def contract_gammas(snapshot: ChainSnapshot, source: GreeksSource = GreeksSource.RECOMPUTE,
                    rate: float = 0.0) -> np.ndarray:
    source = GreeksSource(source)
    if source is GreeksSource.VENDOR:
        missing = [c for c in snapshot.contracts if c.gamma is None]
        if missing:
            c = missing[0]
            raise MissingGamma(f"{snapshot.as_of}: {len(missing)} contract(s) lack vendor gamma, "
                               f"first {c.kind.value} {c.strike} exp {c.expiry}")
        return np.array([c.gamma for c in snapshot.contracts], dtype=np.float64)
    a = _arrays(snapshot)
    return kernels.gamma_array(snapshot.spot, a.strikes, a.tte, a.iv, rate)


def contract_gex(snapshot: ChainSnapshot, source: GreeksSource = GreeksSource.RECOMPUTE,
                 rate: float = 0.0) -> np.ndarray:
    """Signed dollar GEX of every contract, in snapshot order."""
    if not snapshot.contracts:
        raise EmptyChain(f"{snapshot.as_of}: chain has no contracts")
    a = _arrays(snapshot)
    g = contract_gammas(snapshot, source, rate)
    return g * a.weights * CONTRACT_MULTIPLIER * snapshot.spot ** 2


def nearest_zero_crossing(grid: np.ndarray, values: np.ndarray, target: float) -> float | None:
    """Sign change of ``values`` closest to ``target``, located by linear interpolation.

    Grid points where the value is exactly zero are skipped when looking for
    sign changes; a crossing spread over such a run is placed at the run's
    midpoint. Returns None when there is no sign change (including an
    all-zero profile).
    """
    grid = np.asarray(grid, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    nz = np.flatnonzero(values != 0.0)
    if nz.size < 2:
        return None
    a, b = nz[:-1], nz[1:]
    flips = np.signbit(values[a]) != np.signbit(values[b])
    if not flips.any():
        return None
    a, b = a[flips], b[flips]
    va, vb = values[a], values[b]
    adjacent = b == a + 1
    interp = grid[a] - va * (grid[b] - grid[a]) / (vb - va)
    midrun = 0.5 * (grid[np.minimum(a + 1, grid.size - 1)] + grid[np.maximum(b - 1, 0)])
    roots = np.where(adjacent, interp, midrun)
    # argmin takes the first (lowest) root on ties
    return float(roots[np.argmin(np.abs(roots - target))])


def gex_at_spots(snapshot: ChainSnapshot, spots, rate: float = 0.0) -> np.ndarray:
    """Net GEX revalued at each hypothetical spot, with strikes, OI and IV frozen."""
    a = _arrays(snapshot)
    return kernels.gex_curve(np.asarray(spots, dtype=np.float64), a.strikes, a.tte, a.iv, a.weights, rate)


def compute_flip_point(snapshot: ChainSnapshot, grid: FlipGrid = FlipGrid(), rate: float = 0.0) -> float | None:
    if not snapshot.contracts:
        return None
    levels = grid.levels(snapshot.spot)
    return nearest_zero_crossing(levels, gex_at_spots(snapshot, levels, rate), snapshot.spot)


def _top_strike_share(snapshot: ChainSnapshot, window: float, near_dte: int):
    spot = snapshot.spot
    by_strike: dict[float, int] = {}
    for c in snapshot.contracts:
        if c.dte(snapshot.as_of) < near_dte and abs(c.strike / spot - 1.0) <= window:
            by_strike[c.strike] = by_strike.get(c.strike, 0) + c.open_interest
    total = sum(by_strike.values())
    if total == 0:
        return None, None
    # most OI first, then closest to spot, then lowest strike
    strike = min(by_strike, key=lambda k: (-by_strike[k], abs(k - spot), k))
    return by_strike[strike] / total, strike


def concentration_metrics(snapshot: ChainSnapshot, window: float = DEFAULT_THRESHOLDS.conc_window,
                          near_dte: int = DEFAULT_THRESHOLDS.conc_near_dte,
                          greeks_source: GreeksSource = GreeksSource.RECOMPUTE,
                          rate: float = 0.0) -> Concentration:
    """Call share of gamma dollars plus the heaviest near-dated strike around spot.

    The OI share is taken over contracts with fewer than ``near_dte`` days to
    expiry and strikes within ``window`` of spot; both share and strike are
    None when no such contract carries open interest.
    """
    if not 0 < window <= 0.10:
        raise ValueError("window must lie in (0, 0.10]")
    gex = contract_gex(snapshot, greeks_source, rate)
    is_call = _arrays(snapshot).is_call
    share, strike = _top_strike_share(snapshot, window, near_dte)
    return Concentration(call_gamma_share(float(gex[is_call].sum()), float(gex[~is_call].sum())),
                         share, strike)


def _min_dte(snapshot: ChainSnapshot) -> int:
    live = [c for c in snapshot.contracts if c.open_interest > 0] or list(snapshot.contracts)
    return min(c.dte(snapshot.as_of) for c in live)


def compute_gex(snapshot: ChainSnapshot, greeks_source: GreeksSource = GreeksSource.RECOMPUTE, *,
                thresholds: Thresholds = DEFAULT_THRESHOLDS, grid: FlipGrid = FlipGrid(),
                rate: float = 0.0) -> GexProfile:
    gex = contract_gex(snapshot, greeks_source, rate)
    a = _arrays(snapshot)
    call_gex = float(gex[a.is_call].sum())
    put_gex = float(gex[~a.is_call].sum())
    net = call_gex + put_gex

    per_strike: dict[float, float] = {}
    for k, v in zip(a.strikes.tolist(), gex.tolist()):
        per_strike[k] = per_strike.get(k, 0.0) + v
    share, strike = _top_strike_share(snapshot, thresholds.conc_window, thresholds.conc_near_dte)

    return GexProfile(
        as_of=snapshot.as_of,
        net_gex=net,
        call_gex=call_gex,
        put_gex=put_gex,
        spot=snapshot.spot,
        flip_point=compute_flip_point(snapshot, grid, rate),
        call_gamma_concentration=call_gamma_share(call_gex, put_gex),
        top_strike_oi_share=share,
        top_strike=strike,
        regime=classify_regime(net, thresholds),
        min_dte=_min_dte(snapshot),
        per_strike_gex=dict(sorted(per_strike.items())),
        ticker=snapshot.ticker,
    )


def _opt(x):
    return "" if x is None else format_float(x)


def write_gex_csv(path, profiles: Iterable[GexProfile]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GEX_HEADER)
        for p in sorted(profiles, key=lambda p: p.as_of):
            w.writerow([p.as_of.isoformat(), format_float(p.net_gex), format_float(p.call_gex),
                        format_float(p.put_gex), format_float(p.spot), _opt(p.flip_point),
                        _opt(p.call_gamma_concentration), _opt(p.top_strike_oi_share),
                        p.regime.value, str(p.min_dte), _opt(p.top_strike)])


def write_strike_gex_csv(path, profiles: Iterable[GexProfile]) -> None:
    """Long-format per-strike GEX for plotting."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date", "strike", "gex"))
        for p in sorted(profiles, key=lambda p: p.as_of):
            for k, v in p.per_strike_gex.items():
                w.writerow([p.as_of.isoformat(), format_float(k), format_float(v)])


def read_gex_csv(path, ticker: str = "") -> list[GexProfile]:
    def opt(raw):
        return float(raw) if raw.strip() else None

    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(GexProfile(
                as_of=date.fromisoformat(row["date"]),
                net_gex=float(row["net_gex"]),
                call_gex=float(row["call_gex"]),
                put_gex=float(row["put_gex"]),
                spot=float(row["spot"]),
                flip_point=opt(row["flip_point"]),
                call_gamma_concentration=opt(row["call_conc"]),
                top_strike_oi_share=opt(row["top_oi_share"]),
                top_strike=opt(row.get("top_strike", "")),
                regime=Regime(row["regime"]),
                min_dte=int(row["min_dte"]),
                ticker=ticker,
            ))
    return out


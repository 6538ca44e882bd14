"""Options-chain snapshots and underlying bars loaded from flat CSV files.

Chain files hold one row per contract::

    date,ticker,expiry,strike,kind,open_interest,implied_vol,gamma,bid,ask[,spot]

``kind`` is ``C`` or ``P`` and ``gamma`` may be empty (it is recomputed
downstream). The trailing ``spot`` column carries the underlying close for
the snapshot; files without it need a ``spots`` mapping at load time.
Bars files use ``date,open,high,low,close``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from gexprobe.errors import (
    DuplicateDate,
    EmptyFile,
    HighLowInversion,
    InvertedQuote,
    MalformedRow,
    NegativeOI,
)

log = logging.getLogger(__name__)

CHAIN_HEADER = ("date", "ticker", "expiry", "strike", "kind", "open_interest",
                "implied_vol", "gamma", "bid", "ask")
CHAIN_HEADER_WITH_SPOT = CHAIN_HEADER + ("spot",)
BARS_HEADER = ("date", "open", "high", "low", "close")

STRIKE_COVERAGE_TARGET = 0.10
COVERAGE_THRESHOLD = 0.80


class OptionKind(str, Enum):
    CALL = "C"
    PUT = "P"


@dataclass(frozen=True)
class OptionContract:
    strike: float
    expiry: date
    kind: OptionKind
    open_interest: int
    implied_vol: float
    gamma: float | None = None
    bid: float = 0.0
    ask: float = 0.0

    def dte(self, as_of: date) -> int:
        return (self.expiry - as_of).days


@dataclass(frozen=True)
class ChainSnapshot:
    as_of: date
    ticker: str
    spot: float
    contracts: tuple[OptionContract, ...]

    @property
    def strike_coverage(self) -> float:
        """Largest relative distance of any listed strike from spot."""
        if not self.contracts:
            return 0.0
        return max(abs(c.strike / self.spot - 1.0) for c in self.contracts)

    @property
    def has_vendor_gamma(self) -> bool:
        return all(c.gamma is not None for c in self.contracts)


@dataclass(frozen=True)
class UnderlyingBar:
    date: date
    open: float
    high: float
    low: float
    close: float


@dataclass(frozen=True)
class Calendar:
    dates: tuple[date, ...]
    expected: int | None = None

    def __post_init__(self):
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise ValueError(f"calendar dates must be strictly increasing: {a} then {b}")
        if self.expected is not None and self.expected < len(self.dates):
            raise ValueError("expected trading days cannot be below observed days")

    @classmethod
    def from_snapshots(cls, snapshots: Iterable[ChainSnapshot], expected: int | None = None) -> Calendar:
        return cls(tuple(sorted({s.as_of for s in snapshots})), expected)

    @property
    def coverage_ratio(self) -> float:
        expected = self.expected if self.expected is not None else len(self.dates)
        return len(self.dates) / expected if expected else 0.0

    def index(self, d: date) -> int:
        return self.dates.index(d)

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True)
class CoverageReport:
    observed: int
    expected: int
    ratio: float
    threshold: float = COVERAGE_THRESHOLD
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed", self.ratio >= self.threshold)


def coverage_report(calendar: Calendar, expected: int, threshold: float = COVERAGE_THRESHOLD) -> CoverageReport:
    if expected <= 0:
        raise ValueError("expected trading days must be positive")
    return CoverageReport(len(calendar), expected, len(calendar) / expected, threshold)


def format_float(x: float) -> str:
    # repr is the shortest string that round-trips
    return repr(float(x))


def _parse_date(raw, line, name):
    try:
        return date.fromisoformat(raw.strip())
    except (ValueError, AttributeError):
        raise MalformedRow(f"bad ISO date {raw!r}", line=line, field=name) from None


def _parse_float(raw, line, name, *, optional=False):
    raw = (raw or "").strip()
    if not raw:
        if optional:
            return None
        raise MalformedRow("missing value", line=line, field=name)
    try:
        value = float(raw)
    except ValueError:
        raise MalformedRow(f"not a number: {raw!r}", line=line, field=name) from None
    if not math.isfinite(value):
        raise MalformedRow(f"non-finite value {raw!r}", line=line, field=name)
    return value


def _parse_int(raw, line, name):
    value = _parse_float(raw, line, name)
    if value != int(value):
        raise MalformedRow(f"not an integer: {raw!r}", line=line, field=name)
    return int(value)


def _read_rows(path, required):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        header = [h.strip() for h in header]
        missing = [h for h in required if h not in header]
        if missing:
            raise MalformedRow(f"header missing columns {missing}", line=1)
        cols = {h: i for i, h in enumerate(header)}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise MalformedRow(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            rows.append((lineno, {h: row[i] for h, i in cols.items()}))
    if not rows:
        raise EmptyFile(f"{path} has a header but no data rows")
    return rows


def _parse_contract(rec, lineno, as_of):
    strike = _parse_float(rec["strike"], lineno, "strike")
    if strike <= 0:
        raise MalformedRow("strike must be positive", line=lineno, field="strike")
    expiry = _parse_date(rec["expiry"], lineno, "expiry")
    if expiry < as_of:
        raise MalformedRow("expiry precedes snapshot date", line=lineno, field="expiry")
    kind_raw = rec["kind"].strip().upper()
    try:
        kind = OptionKind(kind_raw)
    except ValueError:
        raise MalformedRow(f"kind must be C or P, got {kind_raw!r}", line=lineno, field="kind") from None
    oi = _parse_int(rec["open_interest"], lineno, "open_interest")
    if oi < 0:
        raise NegativeOI(f"open interest {oi} is negative", line=lineno, field="open_interest")
    iv = _parse_float(rec["implied_vol"], lineno, "implied_vol")
    if iv <= 0:
        raise MalformedRow("implied vol must be positive", line=lineno, field="implied_vol")
    gamma = _parse_float(rec["gamma"], lineno, "gamma", optional=True)
    if gamma is not None and gamma < 0:
        raise MalformedRow("gamma must be non-negative", line=lineno, field="gamma")
    bid = _parse_float(rec["bid"], lineno, "bid")
    ask = _parse_float(rec["ask"], lineno, "ask")
    if bid < 0:
        raise MalformedRow("bid must be non-negative", line=lineno, field="bid")
    if ask < bid:
        raise InvertedQuote(f"ask {ask} below bid {bid}", line=lineno, field="ask")
    return OptionContract(strike, expiry, kind, oi, iv, gamma, bid, ask)


def load_chain_file(path, spots: Mapping[date, float] | None = None) -> list[ChainSnapshot]:
    """Parse a chain CSV into one snapshot per (date, ticker), sorted by date."""
    rows = _read_rows(path, CHAIN_HEADER)
    groups: dict[tuple[date, str], list] = {}
    spot_seen: dict[tuple[date, str], tuple[float, int]] = {}
    for lineno, rec in rows:
        as_of = _parse_date(rec["date"], lineno, "date")
        ticker = rec["ticker"].strip()
        if not ticker:
            raise MalformedRow("missing ticker", line=lineno, field="ticker")
        key = (as_of, ticker)
        groups.setdefault(key, []).append(_parse_contract(rec, lineno, as_of))
        if "spot" in rec and rec["spot"].strip():
            spot = _parse_float(rec["spot"], lineno, "spot")
            if spot <= 0:
                raise MalformedRow("spot must be positive", line=lineno, field="spot")
            prev = spot_seen.setdefault(key, (spot, lineno))
            if prev[0] != spot:
                raise MalformedRow(f"spot {spot} disagrees with {prev[0]} from line {prev[1]}",
                                   line=lineno, field="spot")

    snapshots = []
    for (as_of, ticker), contracts in sorted(groups.items()):
        if (as_of, ticker) in spot_seen:
            spot = spot_seen[(as_of, ticker)][0]
        elif spots is not None and as_of in spots:
            spot = float(spots[as_of])
        else:
            raise MalformedRow(f"no spot price for {ticker} on {as_of}", field="spot")
        snap = ChainSnapshot(as_of, ticker, spot, tuple(contracts))
        if snap.strike_coverage < STRIKE_COVERAGE_TARGET:
            log.warning("%s %s: strikes only span +/-%.1f%% of spot", ticker, as_of,
                        100 * snap.strike_coverage)
        snapshots.append(snap)
    return snapshots


def _contract_sort_key(c: OptionContract):
    return (c.expiry, c.kind.value, c.strike)


def write_chain_file(path, snapshots: Iterable[ChainSnapshot]) -> None:
    """Write snapshots in canonical form: sorted rows, shortest round-trip floats."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CHAIN_HEADER_WITH_SPOT)
        for snap in sorted(snapshots, key=lambda s: (s.as_of, s.ticker)):
            for c in sorted(snap.contracts, key=_contract_sort_key):
                w.writerow([
                    snap.as_of.isoformat(), snap.ticker, c.expiry.isoformat(),
                    format_float(c.strike), c.kind.value, str(c.open_interest),
                    format_float(c.implied_vol),
                    "" if c.gamma is None else format_float(c.gamma),
                    format_float(c.bid), format_float(c.ask), format_float(snap.spot),
                ])


def load_bars_file(path) -> list[UnderlyingBar]:
    rows = _read_rows(path, BARS_HEADER)
    bars = {}
    for lineno, rec in rows:
        d = _parse_date(rec["date"], lineno, "date")
        o, h, l, c = (_parse_float(rec[k], lineno, k) for k in ("open", "high", "low", "close"))
        if h < l:
            raise HighLowInversion(f"high {h} below low {l}", line=lineno, field="high")
        if l <= 0:
            raise MalformedRow("prices must be positive", line=lineno, field="low")
        if h < max(o, c) or l > min(o, c):
            raise HighLowInversion("open/close outside the [low, high] range", line=lineno)
        if d in bars:
            raise DuplicateDate(f"duplicate bar for {d}", line=lineno, field="date")
        bars[d] = UnderlyingBar(d, o, h, l, c)
    return [bars[d] for d in sorted(bars)]


def write_bars_file(path, bars: Iterable[UnderlyingBar]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BARS_HEADER)
        for b in sorted(bars, key=lambda b: b.date):
            w.writerow([b.date.isoformat(), *(format_float(x) for x in (b.open, b.high, b.low, b.close))])

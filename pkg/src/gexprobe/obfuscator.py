"""Temporal obfuscation of structural GEX records, plus the leak audit.

A case carries only relative session numbers (``Day T+N``), an index alias
(``INDEX_k``) and the structural numbers. The mapping back to real dates
lives in a separate provenance record that is never serialized into a
prompt.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from gexprobe.errors import NonMonotonicDates
from gexprobe.gex_engine import GexProfile


class TemplateKind(str, Enum):
    UNBIASED = "unbiased"
    BIASED = "biased"


@dataclass(frozen=True)
class StructuralDay:
    rel_day: int
    net_gex: float
    call_gex: float
    put_gex: float
    spot: float
    flip_point: float | None
    call_conc: float | None
    top_oi_share: float | None
    rel_dte: int


@dataclass(frozen=True)
class ProvenanceKey:
    case_id: str
    ticker: str
    dates: tuple[date, ...]

    def date_of(self, rel_day: int) -> date:
        return self.dates[rel_day]

    def to_json(self) -> str:
        return json.dumps({"case_id": self.case_id, "ticker": self.ticker,
                           "dates": [d.isoformat() for d in self.dates]}, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> ProvenanceKey:
        d = json.loads(line)
        return cls(d["case_id"], d["ticker"], tuple(date.fromisoformat(x) for x in d["dates"]))


@dataclass(frozen=True)
class ObfuscatedCase:
    case_id: str
    index_alias: str
    days: tuple[StructuralDay, ...]
    template: TemplateKind = TemplateKind.UNBIASED
    hint: tuple[str, ...] | None = None
    provenance_key: ProvenanceKey | None = field(default=None, repr=False, compare=False)

    @property
    def last_day(self) -> StructuralDay:
        return self.days[-1]

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "index_alias": self.index_alias,
            "template": self.template.value,
            "hint": None if self.hint is None else list(self.hint),
            "days": [asdict(d) for d in self.days],
        }

    @classmethod
    def from_dict(cls, d: dict, provenance_key: ProvenanceKey | None = None) -> ObfuscatedCase:
        return cls(
            case_id=d["case_id"],
            index_alias=d["index_alias"],
            days=tuple(StructuralDay(**x) for x in d["days"]),
            template=TemplateKind(d["template"]),
            hint=None if d.get("hint") is None else tuple(d["hint"]),
            provenance_key=provenance_key,
        )


def serialize_case(case: ObfuscatedCase) -> str:
    """Canonical JSON for a case; the provenance key is never included."""
    return json.dumps(case.to_dict(), sort_keys=True, separators=(",", ":"))


def _case_id(base_date: date, ticker: str, seed: int) -> str:
    payload = f"{base_date.isoformat()}|{ticker}|{seed}".encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def structural_day(rel_day: int, profile: GexProfile) -> StructuralDay:
    return StructuralDay(
        rel_day=rel_day,
        net_gex=profile.net_gex,
        call_gex=profile.call_gex,
        put_gex=profile.put_gex,
        spot=profile.spot,
        flip_point=profile.flip_point,
        call_conc=profile.call_gamma_concentration,
        top_oi_share=profile.top_strike_oi_share,
        rel_dte=profile.min_dte,
    )


def obfuscate(window: Sequence[tuple[date, GexProfile]], base_index: int = 1, *, ticker: str | None = None,
              seed: int = 0, template: TemplateKind = TemplateKind.UNBIASED,
              hint: Iterable[str] | None = None) -> ObfuscatedCase:
    """Strip dates and identity from a window of consecutive trading sessions.

    ``rel_day`` is the session's position within the window, so calendar
    gaps such as weekends never show up. The case id hashes the window's
    first date, ticker and seed; it does not depend on the template, so
    biased and unbiased runs over the same window share ids.
    """
    if not window:
        raise ValueError("window must contain at least one day")
    dates = [d for d, _ in window]
    for a, b in zip(dates, dates[1:]):
        if not a < b:
            raise NonMonotonicDates(f"window dates must strictly increase: {a} then {b}")
    if ticker is None:
        ticker = window[0][1].ticker
    template = TemplateKind(template)
    if template is TemplateKind.UNBIASED and hint is not None:
        raise ValueError("hints are only allowed on biased cases")
    case_id = _case_id(dates[0], ticker, seed)
    return ObfuscatedCase(
        case_id=case_id,
        index_alias=f"INDEX_{base_index}",
        days=tuple(structural_day(i, p) for i, (_, p) in enumerate(window)),
        template=template,
        hint=None if hint is None else tuple(hint),
        provenance_key=ProvenanceKey(case_id, ticker, tuple(dates)),
    )


def trailing_windows(items: Sequence[tuple[date, GexProfile]], length: int):
    """Windows ending on each session that has ``length - 1`` predecessors."""
    if length < 1:
        raise ValueError("window length must be >= 1")
    for end in range(length - 1, len(items)):
        yield items[end - length + 1:end + 1]


# --- leak audit -------------------------------------------------------------

DEFAULT_TICKERS = ("SPY", "SPX", "QQQ", "VIX")
DEFAULT_EVENTS = ("FOMC", "earnings", "CPI", "OpEx", "election")

_MONTHS = ("January", "February", "March", "April", "June", "July", "August", "September",
           "October", "November", "December")
_MONTH_ABBR = ("Jan", "Feb", "Mar", "Apr", "Jun", "Jul", "Aug", "Sep", "Sept", "Oct", "Nov", "Dec")
_WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")
_WEEKDAY_ABBR = ("Mon", "Tue", "Tues", "Wed", "Thu", "Thur", "Thurs", "Fri", "Sat", "Sun")


def _words(words, flags=0):
    return re.compile(r"\b(?:" + "|".join(re.escape(w) for w in words) + r")\b", flags)


@dataclass(frozen=True)
class LeakMatch:
    rule: str
    text: str
    offset: int  # byte offset into the UTF-8 encoded text


@dataclass(frozen=True)
class LeakReport:
    matches: tuple[LeakMatch, ...]

    @property
    def clean(self) -> bool:
        return not self.matches


@dataclass(frozen=True)
class LeakRules:
    tickers: tuple[str, ...] = DEFAULT_TICKERS
    events: tuple[str, ...] = DEFAULT_EVENTS
    extra_keywords: tuple[str, ...] = ()
    extra_patterns: tuple[str, ...] = ()

    def compiled(self) -> list[tuple[str, re.Pattern]]:
        rules = [
            ("iso_date", re.compile(r"(?<!\d)(?:19|20)\d{2}[-/.](?:0?[1-9]|1[0-2])[-/.](?:0?[1-9]|[12]\d|3[01])(?!\d)")),
            # four-digit years, but not inside a longer token (hex ids, decimals)
            ("year", re.compile(r"(?<![\w.\-/])(?:199\d|20[0-2]\d|203[0-5])(?![\w\-/]|\.\d)")),
            ("month", _words(_MONTHS, re.IGNORECASE)),
            # "May" only capitalized: as a lowercase word it is ordinary English
            ("month", _words(_MONTH_ABBR + ("May",))),
            ("weekday", _words(_WEEKDAYS, re.IGNORECASE)),
            ("weekday", _words(_WEEKDAY_ABBR)),
            ("vol_context", re.compile(r"\b(?:VIX|volatility index)\s+(?:at|of|near|around)\b", re.IGNORECASE)),
            ("event", _words(("Fed",))),
            ("event", _words(self.events, re.IGNORECASE)),
        ]
        if self.tickers:
            rules.append(("ticker", _words(self.tickers)))
        if self.extra_keywords:
            rules.append(("blocklist", _words(self.extra_keywords, re.IGNORECASE)))
        for pat in self.extra_patterns:
            rules.append(("blocklist", re.compile(pat)))
        return rules

    @classmethod
    def with_blocklist(cls, path, base: LeakRules | None = None) -> LeakRules:
        """Extend ``base`` from a file: one keyword per line, ``re:`` prefix for a regex, ``#`` comments."""
        base = base or cls()
        keywords, patterns = list(base.extra_keywords), list(base.extra_patterns)
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("re:"):
                patterns.append(line[3:].strip())
            else:
                keywords.append(line)
        return cls(base.tickers, base.events, tuple(keywords), tuple(patterns))


DEFAULT_LEAK_RULES = LeakRules()


def leak_audit(text: str, rules: LeakRules = DEFAULT_LEAK_RULES) -> LeakReport:
    """Every date, ticker, event and weekday reference in ``text``."""
    found = []
    for name, rx in rules.compiled():
        for m in rx.finditer(text):
            found.append((m.start(), m.end(), name, m.group(0)))
    # a year inside an ISO date is one leak, not two
    dates = [(s, e) for s, e, n, _ in found if n == "iso_date"]
    found = [f for f in found
             if not (f[2] == "year" and any(s <= f[0] and f[1] <= e for s, e in dates))]
    found.sort(key=lambda f: (f[0], f[2]))
    return LeakReport(tuple(LeakMatch(name, s, len(text[:start].encode("utf-8")))
                            for start, _, name, s in found))


# --- files --------------------------------------------------------------------

def write_cases(path, cases: Iterable[ObfuscatedCase]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for c in cases:
            fh.write(serialize_case(c) + "\n")


def write_provenance(path, cases: Iterable[ObfuscatedCase]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for c in cases:
            fh.write(c.provenance_key.to_json() + "\n")


def read_provenance(path) -> dict[str, ProvenanceKey]:
    keys = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            k = ProvenanceKey.from_json(line)
            keys[k.case_id] = k
    return keys


def read_cases(path, provenance: dict[str, ProvenanceKey] | None = None) -> list[ObfuscatedCase]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            d = json.loads(line)
            out.append(ObfuscatedCase.from_dict(d, (provenance or {}).get(d["case_id"])))
    return out

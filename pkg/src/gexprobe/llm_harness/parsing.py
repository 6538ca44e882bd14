"""Structured-response parsing for WHO -> WHOM -> WHAT detections."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from gexprobe.errors import ParseFailure
from gexprobe.pattern_rules import PatternKind

log = logging.getLogger(__name__)

MECHANICAL_CONFIDENCE = 60
HORIZONS = ("T+1", "T+2", "T+3")


class Classification(str, Enum):
    MECHANICAL = "Mechanical"
    NON_MECHANICAL = "NonMechanical"


def classify(confidence: int, threshold: int = MECHANICAL_CONFIDENCE) -> Classification:
    return Classification.MECHANICAL if confidence >= threshold else Classification.NON_MECHANICAL


@dataclass(frozen=True)
class DetectionResult:
    case_id: str
    detected: bool
    pattern: PatternKind | None
    who: str
    whom: str
    what: str
    confidence: int
    horizon: str | None
    framing: PatternKind | None = None
    error: str | None = None

    @property
    def classification(self) -> Classification:
        return classify(self.confidence)

    @property
    def mechanical(self) -> bool:
        return self.classification is Classification.MECHANICAL

    @property
    def key(self) -> tuple[str, str]:
        return (self.case_id, self.framing.value if self.framing else "")

    @classmethod
    def failed(cls, case_id: str, error: str, framing: PatternKind | None = None) -> DetectionResult:
        return cls(case_id, False, None, "", "", "", 0, None, framing, error)

    def with_framing(self, framing: PatternKind | None) -> DetectionResult:
        return DetectionResult(self.case_id, self.detected, self.pattern, self.who, self.whom, self.what,
                               self.confidence, self.horizon, framing, self.error)

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "detected": self.detected,
            "pattern": self.pattern.value if self.pattern else None,
            "who": self.who,
            "whom": self.whom,
            "what": self.what,
            "confidence": self.confidence,
            "horizon": self.horizon,
            "classification": self.classification.value,
            "framing": self.framing.value if self.framing else None,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> DetectionResult:
        return cls(
            case_id=d["case_id"],
            detected=d["detected"],
            pattern=PatternKind(d["pattern"]) if d.get("pattern") else None,
            who=d.get("who", ""),
            whom=d.get("whom", ""),
            what=d.get("what", ""),
            confidence=d["confidence"],
            horizon=d.get("horizon"),
            framing=PatternKind(d["framing"]) if d.get("framing") else None,
            error=d.get("error"),
        )


def first_json_object(text: str) -> dict:
    """The first decodable JSON object embedded anywhere in ``text``."""
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            start = text.find("{", start + 1)
            continue
        if isinstance(obj, dict):
            return obj
        start = text.find("{", start + 1)
    raise ParseFailure("no JSON object found in completion")


def _pattern(raw):
    if raw is None:
        return None
    if not isinstance(raw, str):
        raise ParseFailure(f"pattern must be a string or null, got {raw!r}")
    norm = raw.strip().lower().replace(" ", "_").replace("-", "_")
    aliases = {"gammapositioning": "gamma_positioning", "stockpinning": "stock_pinning",
               "zerodtehedging": "zero_dte_hedging", "0dte_hedging": "zero_dte_hedging"}
    norm = aliases.get(norm.replace("_", ""), norm)
    try:
        return PatternKind(norm)
    except ValueError:
        raise ParseFailure(f"unknown pattern {raw!r}") from None


def _confidence(raw, case_id):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ParseFailure(f"confidence must be a number, got {raw!r}")
    if raw != int(raw):
        raise ParseFailure(f"confidence must be an integer, got {raw!r}")
    value = int(raw)
    if not 0 <= value <= 100:
        clamped = min(100, max(0, value))
        log.warning("case %s: confidence %d outside [0, 100], clamped to %d", case_id, value, clamped)
        value = clamped
    return value


def parse_response(raw: dict | str, *, allows_null: bool = True, expected_case_id: str | None = None) -> DetectionResult:
    """Validate one detection entry; classification is derived, never read from the model."""
    if isinstance(raw, str):
        raw = first_json_object(raw)
    if not isinstance(raw, dict):
        raise ParseFailure(f"detection must be an object, got {type(raw).__name__}")
    case_id = raw.get("case_id", expected_case_id)
    if not isinstance(case_id, str) or not case_id:
        raise ParseFailure("missing case_id")
    if expected_case_id is not None and case_id != expected_case_id:
        raise ParseFailure(f"case_id {case_id!r} does not match {expected_case_id!r}")
    detected = raw.get("detected")
    if not isinstance(detected, bool):
        raise ParseFailure(f"detected must be a boolean, got {detected!r}")
    if "confidence" not in raw:
        raise ParseFailure("missing confidence")
    confidence = _confidence(raw["confidence"], case_id)

    texts = {}
    for name in ("who", "whom", "what"):
        value = raw.get(name, "")
        if value is None:
            value = ""
        if not isinstance(value, str):
            raise ParseFailure(f"{name} must be a string")
        texts[name] = value.strip()

    horizon = raw.get("horizon")
    if horizon is not None and horizon not in HORIZONS:
        raise ParseFailure(f"horizon must be one of {HORIZONS}, got {horizon!r}")

    if detected:
        empty = [n for n, v in texts.items() if not v]
        if empty:
            raise ParseFailure(f"detected=true requires non-empty {', '.join(empty)}")
        if horizon is None:
            raise ParseFailure("detected=true requires a horizon")
        pattern = _pattern(raw.get("pattern"))
    else:
        if not allows_null:
            raise ParseFailure("this template does not permit a null detection")
        if confidence != 0:
            log.warning("case %s: null detection reported confidence %d, set to 0", case_id, confidence)
            confidence = 0
        pattern = None
    return DetectionResult(case_id, detected, pattern, texts["who"], texts["whom"], texts["what"],
                           confidence, horizon)


def parse_batch(completion: str, case_ids: Iterable[str], *, allows_null: bool = True) -> dict[str, DetectionResult | ParseFailure]:
    """Per-case outcome of a batch completion: a result, or the failure that blocked it."""
    case_ids = list(case_ids)
    try:
        envelope = first_json_object(completion)
    except ParseFailure as exc:
        return {cid: exc for cid in case_ids}
    entries = envelope.get("results")
    if entries is None and "case_id" in envelope:
        entries = [envelope]
    if not isinstance(entries, list):
        err = ParseFailure("response object has no 'results' list")
        return {cid: err for cid in case_ids}

    by_id: dict[str, list] = {}
    for entry in entries:
        if isinstance(entry, dict) and isinstance(entry.get("case_id"), str):
            by_id.setdefault(entry["case_id"], []).append(entry)
    out: dict[str, DetectionResult | ParseFailure] = {}
    for cid in case_ids:
        found = by_id.get(cid, [])
        if len(found) != 1:
            out[cid] = ParseFailure(f"expected one entry for case {cid}, found {len(found)}")
            continue
        try:
            out[cid] = parse_response(found[0], allows_null=allows_null, expected_case_id=cid)
        except ParseFailure as exc:
            out[cid] = exc
    return out


def write_detections(path, results: Iterable[DetectionResult]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_detections(path) -> list[DetectionResult]:
    return [DetectionResult.from_dict(json.loads(line))
            for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]

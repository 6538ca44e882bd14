"""Unbiased and biased prompt templates and their renderer.

Placeholders use ``{{name}}`` so literal JSON braces in the schema block
need no escaping. Rendering fails loudly on any placeholder left unfilled.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from gexprobe.errors import LeakDetected, UnfilledPlaceholder
from gexprobe.gex_engine import classify_regime, Regime
from gexprobe.obfuscator import (
    DEFAULT_LEAK_RULES,
    LeakRules,
    ObfuscatedCase,
    StructuralDay,
    TemplateKind,
    leak_audit,
    serialize_case,
)
from gexprobe.pattern_rules import PatternKind
from gexprobe.thresholds import DEFAULT_THRESHOLDS, Thresholds

_PLACEHOLDER = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")

REGIME_LABELS = {
    Regime.NEGATIVE: "NEGATIVE_GAMMA",
    Regime.NEUTRAL: "NEUTRAL_GAMMA",
    Regime.POSITIVE: "POSITIVE_GAMMA",
}
REGIME_WORDS = tuple(REGIME_LABELS.values()) + ("regime", "negative gamma", "positive gamma", "short gamma",
                                                "long gamma")

# Framing lenses, one per pattern: technical, behavioral, temporal.
FRAMINGS = {
    PatternKind.GAMMA_POSITIONING: "Analysis lens: technical. Focus on aggregate option Greek exposure "
                                   "and where it changes sign relative to spot.",
    PatternKind.STOCK_PINNING: "Analysis lens: behavioral. Focus on strike magnetism: whether price is "
                               "drawn toward a heavily loaded strike.",
    PatternKind.ZERO_DTE_HEDGING: "Analysis lens: temporal. Focus on expiration dynamics of the nearest "
                                  "expiry and the rebalancing it forces.",
}

RESPONSE_SCHEMA = """\
Respond with a single JSON object and nothing else:
{"results": [{"case_id": "<case id>",
              "detected": true | false,
              "pattern": "gamma_positioning" | "stock_pinning" | "zero_dte_hedging" | null,
              "who": "<actor whose structural constraint forces trading>",
              "whom": "<participants affected by that trading>",
              "what": "<the forced action and its consequence>",
              "confidence": <integer 0-100>,
              "horizon": "T+1" | "T+2" | "T+3"}]}
Return exactly one entry per case, using the case ids given above."""


@dataclass(frozen=True)
class PromptTemplate:
    kind: TemplateKind
    body: str
    case_block: str
    allows_null_detection: bool

    def __post_init__(self):
        if self.kind is TemplateKind.UNBIASED:
            if not self.allows_null_detection:
                raise ValueError("the unbiased template must allow null detections")
            lowered = (self.body + self.case_block).lower()
            bad = [w for w in REGIME_WORDS if w.lower() in lowered]
            if bad:
                raise ValueError(f"unbiased template contains regime wording {bad}")
        else:
            if self.allows_null_detection:
                raise ValueError("the biased template cannot allow null detections")
            if "{{regime_label}}" not in self.case_block or "{{hint}}" not in self.case_block:
                raise ValueError("biased case block needs {{regime_label}} and {{hint}}")

    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER.findall(self.body)) | set(_PLACEHOLDER.findall(self.case_block))


UNBIASED = PromptTemplate(
    kind=TemplateKind.UNBIASED,
    body="""\
You are given end-of-day options positioning data for an equity index, identified only by an alias.
Sessions are numbered relative to the first session shown (Day T+0, Day T+1, ...).
Dollar gamma exposure (GEX) is aggregated across all listed strikes; call gamma is counted
positive and put gamma negative.
{{framing}}
For each case below: Do you detect any structural market mechanics?
If you do, name WHO is structurally constrained, WHOM their forced trading affects, and WHAT
action they are forced into along with its consequence. If you detect nothing, answer
detected=false with confidence 0.

{{cases}}

{{response_schema}}
""",
    case_block="""\
Case {{case_id}} ({{index_alias}}):
{{days}}""",
    allows_null_detection=True,
)

BIASED = PromptTemplate(
    kind=TemplateKind.BIASED,
    body="""\
You are given end-of-day options positioning data for an equity index, identified only by an alias.
Sessions are numbered relative to the first session shown (Day T+0, Day T+1, ...).
Dollar gamma exposure (GEX) is aggregated across all listed strikes; call gamma is counted
positive and put gamma negative.
{{framing}}
Each case carries its gamma regime label and any hints from rule-based screening.
What patterns do you see? Every case contains a pattern: identify it, and name WHO is
structurally constrained, WHOM their forced trading affects, and WHAT action they are forced
into along with its consequence.

{{cases}}

{{response_schema}}
""",
    case_block="""\
Case {{case_id}} ({{index_alias}}):
Gamma regime: {{regime_label}}
{{hint}}
{{days}}""",
    allows_null_detection=False,
)


def default_template(kind: TemplateKind) -> PromptTemplate:
    return UNBIASED if TemplateKind(kind) is TemplateKind.UNBIASED else BIASED


def fill(text: str, values: dict[str, str]) -> str:
    def sub(m):
        name = m.group(1)
        if name not in values:
            raise UnfilledPlaceholder(f"no value for placeholder {{{{{name}}}}}")
        return values[name]

    out = _PLACEHOLDER.sub(sub, text)
    left = _PLACEHOLDER.findall(out)
    if left:
        raise UnfilledPlaceholder(f"placeholders left after rendering: {sorted(set(left))}")
    return out


def format_billions(x: float) -> str:
    """-32.9e9 -> '-$32.9B'."""
    b = round(x / 1e9, 1)
    sign = "-" if b < 0 else ""
    return f"{sign}${abs(b):.1f}B"


def _pct(x):
    return "n/a" if x is None else f"{100 * x:.1f}%"


def _price(x):
    return "none on grid" if x is None else f"{x:.2f}"


def format_day(day: StructuralDay, alias: str) -> str:
    return (f"Day T+{day.rel_day} {alias}: Spot: {_price(day.spot)} | Net GEX: {format_billions(day.net_gex)} | "
            f"Call GEX: {format_billions(day.call_gex)} | Put GEX: {format_billions(day.put_gex)} | "
            f"Flip point: {_price(day.flip_point)} | Call gamma share: {_pct(day.call_conc)} | "
            f"Top near-dated strike OI share: {_pct(day.top_oi_share)} | "
            f"Nearest expiry: {day.rel_dte} day(s)")


def regime_label(case: ObfuscatedCase, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> str:
    """Label of the case's final session, the one the detection is about."""
    return REGIME_LABELS[classify_regime(case.last_day.net_gex, thresholds)]


def _hint_line(case: ObfuscatedCase) -> str:
    if not case.hint:
        return "Screening hints: none"
    return "Screening hints: rule-based screening flagged " + ", ".join(case.hint)


def _case_values(case: ObfuscatedCase, template: PromptTemplate, thresholds: Thresholds) -> dict[str, str]:
    values = {
        "case_id": case.case_id,
        "index_alias": case.index_alias,
        "days": "\n".join(format_day(d, case.index_alias) for d in case.days),
    }
    if template.kind is TemplateKind.BIASED:
        values["regime_label"] = regime_label(case, thresholds)
        values["hint"] = _hint_line(case)
    return values


def render_batch(cases: Sequence[ObfuscatedCase], template: PromptTemplate, *,
                 focus: PatternKind | None = None, thresholds: Thresholds = DEFAULT_THRESHOLDS,
                 rules: LeakRules = DEFAULT_LEAK_RULES) -> str:
    """One prompt covering every case in ``cases``.

    Each case's serialization is audited before rendering and the finished
    prompt is audited again; any match raises :class:`LeakDetected`.
    """
    if not cases:
        raise ValueError("cannot render an empty batch")
    blocks = []
    for case in cases:
        report = leak_audit(serialize_case(case), rules)
        if not report.clean:
            raise LeakDetected(report, f"case {case.case_id}")
        blocks.append(fill(template.case_block, _case_values(case, template, thresholds)))
    text = fill(template.body, {
        "framing": FRAMINGS[focus] if focus is not None else "",
        "cases": "\n\n".join(blocks),
        "response_schema": RESPONSE_SCHEMA,
    })
    report = leak_audit(text, rules)
    if not report.clean:
        raise LeakDetected(report, "rendered prompt")
    return text


def render_prompt(case: ObfuscatedCase, template: PromptTemplate, **kwargs) -> str:
    return render_batch([case], template, **kwargs)

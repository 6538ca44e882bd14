"""Run configuration stored as a sectioned INI file.

Every threshold is written out with its default, so a config file is a
complete record of a run. The API key never lives here: ``api_key_env``
names the environment variable that holds it.
"""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from gexprobe.thresholds import DEFAULT_THRESHOLDS, Thresholds


@dataclass(frozen=True)
class DataConfig:
    source: str = "synth"            # "files" or "synth"
    chains: str = ""
    bars: str = ""
    ticker: str = "SPY"
    expected_days: int = 0           # 0: coverage measured against observed days


@dataclass(frozen=True)
class SynthConfig:
    regime: str = "PersistentNegative"
    days: int = 30
    seed: int = 7
    base_spot: float = 500.0
    vol: float = 0.15
    start: str = "2024-01-02"


@dataclass(frozen=True)
class GexConfig:
    greeks_source: str = "recompute"
    rate: float = 0.0


@dataclass(frozen=True)
class ObfuscationConfig:
    seed: int = 0
    window: int = 1


@dataclass(frozen=True)
class DetectConfig:
    template: str = "unbiased"
    agent: str = "mock"              # "mock" or "live"
    framing: str = "per_pattern"     # one call per pattern lens, or "combined"
    batch_size: int = 10
    max_in_flight: int = 1
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model_name: str = "gpt-4o"
    max_attempts: int = 3
    backoff_base: float = 1.0
    timeout: float = 120.0
    temperature: float = 0.0
    api_key_env: str = "GEXPROBE_API_KEY"


@dataclass(frozen=True)
class OutcomeConfig:
    mode: str = "strict"


@dataclass(frozen=True)
class StatsConfig:
    alpha: float = 0.05
    p0: float = 0.5
    bootstrap_iterations: int = 10_000
    bootstrap_seed: int = 0
    tc_per_trade: float = 0.0005


_SECTIONS = {
    "data": DataConfig, "synth": SynthConfig, "gex": GexConfig, "obfuscation": ObfuscationConfig,
    "detect": DetectConfig, "outcomes": OutcomeConfig, "stats": StatsConfig,
}


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    gex: GexConfig = field(default_factory=GexConfig)
    thresholds: Thresholds = DEFAULT_THRESHOLDS
    obfuscation: ObfuscationConfig = field(default_factory=ObfuscationConfig)
    detect: DetectConfig = field(default_factory=DetectConfig)
    outcomes: OutcomeConfig = field(default_factory=OutcomeConfig)
    stats: StatsConfig = field(default_factory=StatsConfig)
    out: str = "run"

    def __post_init__(self):
        _choice("data.source", self.data.source, ("files", "synth"))
        _choice("gex.greeks_source", self.gex.greeks_source, ("vendor", "recompute"))
        _choice("detect.template", self.detect.template, ("unbiased", "biased"))
        _choice("detect.agent", self.detect.agent, ("mock", "live"))
        _choice("detect.framing", self.detect.framing, ("per_pattern", "combined"))
        _choice("outcomes.mode", self.outcomes.mode, ("strict", "broad"))
        if self.obfuscation.window < 1:
            raise ValueError("obfuscation.window must be >= 1")

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["run"] = {"out": self.out}
        for name in _SECTIONS:
            cp[name] = {f.name: _fmt(getattr(getattr(self, name), f.name)) for f in fields(_SECTIONS[name])}
        cp["thresholds"] = {k: _fmt(v) for k, v in self.thresholds.as_dict().items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> RunConfig:
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_string(text)
        unknown = set(cp.sections()) - set(_SECTIONS) - {"run", "thresholds"}
        if unknown:
            raise KeyError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        kw = {}
        for name, klass in _SECTIONS.items():
            if cp.has_section(name):
                kw[name] = _section(klass, cp[name])
        if cp.has_section("thresholds"):
            kw["thresholds"] = Thresholds.from_dict(dict(cp["thresholds"]))
        if cp.has_section("run"):
            kw["out"] = cp["run"].get("out", "run")
        return cls(**kw)

    @property
    def hash(self) -> str:
        """Digest of everything that shapes results; the output location is excluded."""
        return hashlib.sha256(replace(self, out="").to_ini().encode()).hexdigest()

    def with_overrides(self, **sections) -> RunConfig:
        """``with_overrides(detect={"template": "biased"}, out="x")``."""
        kw = {}
        for key, value in sections.items():
            if isinstance(value, dict):
                kw[key] = replace(getattr(self, key), **value)
            else:
                kw[key] = value
        return replace(self, **kw)


def _choice(name, value, allowed):
    if value not in allowed:
        raise ValueError(f"{name} must be one of {allowed}, got {value!r}")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _section(klass, sec):
    known = {f.name: f for f in fields(klass)}
    defaults = klass()
    kw = {}
    for key, raw in sec.items():
        if key not in known:
            raise KeyError(f"unknown key {key!r} in section [{sec.name}]")
        kind = type(getattr(defaults, key))
        kw[key] = raw if kind is str else kind(raw)
    return klass(**kw)


def load_config(path) -> RunConfig:
    return RunConfig.from_ini(Path(path).read_text(encoding="utf-8"))


def save_config(path, config: RunConfig) -> None:
    Path(path).write_text(config.to_ini(), encoding="utf-8")

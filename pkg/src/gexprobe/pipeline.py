"""Stage orchestration with checksummed, resumable run directories.

Every stage reads files written by earlier stages (or external inputs) and
writes its own files into the run directory. ``manifest.json`` records, per
stage, the SHA-256 of each input and output. A stage whose recorded
inputs, outputs and config hash all still match is skipped on rerun, so an
edited intermediate file forces its consumers to run again.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Callable

import numpy as np
import scipy

from gexprobe import __version__
from gexprobe import kernels
from gexprobe.config import RunConfig
from gexprobe.errors import GateFailure, GexProbeError, ProviderUnavailable, StageError
from gexprobe.gex_engine import GreeksSource, compute_gex, read_gex_csv, write_gex_csv, write_strike_gex_csv
from gexprobe.llm_harness.agents import AgentConfig, HttpAgent, MockAgent
from gexprobe.llm_harness.harness import DetectionJournal, run_batch
from gexprobe.llm_harness.parsing import read_detections, write_detections
from gexprobe.llm_harness.templates import default_template
from gexprobe.market_data import Calendar, coverage_report, load_bars_file, load_chain_file, write_chain_file
from gexprobe.obfuscator import (TemplateKind, obfuscate, read_cases, read_provenance, trailing_windows,
                                 write_cases, write_provenance)
from gexprobe.outcome_engine import MaterializationMode, read_outcomes_csv, score_detections, write_outcomes_csv
from gexprobe.pattern_rules import PatternKind, evaluate_all, read_signals_csv, write_signals_csv
from gexprobe.stats_validator.report import build_report, write_report
from gexprobe.synth_market import ScenarioSpec, generate, write_scenario

log = logging.getLogger(__name__)

STAGES = ("synth", "ingest", "gex", "rules", "obfuscate", "detect", "outcomes", "validate")
MODULES = {
    "synth": "synth_market", "ingest": "market_data", "gex": "gex_engine", "rules": "pattern_rules",
    "obfuscate": "obfuscator", "detect": "llm_harness", "outcomes": "outcome_engine",
    "validate": "stats_validator", "report": "stats_validator",
}

# run-directory layout, relative to the run root
P = {
    "synth_chains": "synth/chains.csv", "synth_bars": "synth/bars.csv", "synth_truth": "synth/truth.csv",
    "chains": "chains.csv", "calendar": "calendar.csv", "coverage": "coverage.json",
    "gex": "gex.csv", "strike_gex": "strike_gex.csv", "signals": "signals.csv",
    "cases": "cases.jsonl", "provenance": "restricted/provenance.jsonl",
    "journal": "detections.journal.jsonl", "detections": "detections.jsonl",
    "outcomes": "outcomes.csv", "report": "report.json",
}
TABLES = ("detection", "quarterly", "materialization", "granger", "regime_distribution")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def versions() -> dict:
    return {"gexprobe": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": ".".join(map(str, sys.version_info[:3])), "kernel_backend": kernels.BACKEND}


@dataclass
class StageSpec:
    name: str
    fn: Callable
    inputs: Callable      # (Run) -> list[Path]
    outputs: Callable     # (Run) -> list[Path]


class Run:
    """One run directory plus the config that drives it."""

    def __init__(self, config: RunConfig, out: str | Path | None = None):
        self.config = config
        self.root = Path(out if out is not None else config.out)
        self.manifest_path = self.root / "manifest.json"

    def path(self, key: str) -> Path:
        return self.root / P[key]

    # external inputs --------------------------------------------------------
    def chains_source(self) -> Path:
        if self.config.data.source == "synth":
            return self.path("synth_chains")
        return Path(self.config.data.chains)

    def bars_source(self) -> Path:
        if self.config.data.source == "synth":
            return self.path("synth_bars")
        return Path(self.config.data.bars)

    # manifest ---------------------------------------------------------------
    def load_manifest(self) -> dict:
        if self.manifest_path.exists():
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        return {"config_hash": self.config.hash, "versions": versions(), "stages": {}}

    def save_manifest(self, manifest: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def _rel(self, p: Path) -> str:
        try:
            return p.resolve().relative_to(self.root.resolve()).as_posix()
        except ValueError:
            return str(p)

    def checksums(self, paths) -> dict[str, str | None]:
        return {self._rel(p): (sha256_file(p) if p.exists() else None) for p in paths}


# --- stages -----------------------------------------------------------------

def _need(run: Run, stage: str, *paths: Path) -> None:
    for p in paths:
        if not p.exists():
            hint = " (bars file for the outcome window)" if stage == "outcomes" and p == run.bars_source() else ""
            raise StageError(stage, MODULES[stage], f"missing input {p}{hint}")


def stage_synth(run: Run) -> None:
    s = run.config.synth
    spec = ScenarioSpec(days=s.days, regime=s.regime, base_spot=s.base_spot, vol=s.vol, seed=s.seed,
                        start=date.fromisoformat(s.start), ticker=run.config.data.ticker)
    write_scenario(run.root / "synth", generate(spec, run.config.thresholds))


def stage_ingest(run: Run) -> None:
    src = run.chains_source()
    _need(run, "ingest", src)
    snaps = load_chain_file(src)
    cal = Calendar.from_snapshots(snaps)
    if len(cal) != len(snaps):
        raise StageError("ingest", "market_data", "more than one ticker per date is not supported")
    expected = run.config.data.expected_days or len(cal)
    cov = coverage_report(cal, expected)
    run.path("coverage").write_text(json.dumps({"observed": cov.observed, "expected": cov.expected,
                                               "ratio": cov.ratio, "threshold": cov.threshold,
                                               "passed": cov.passed}, sort_keys=True) + "\n", encoding="utf-8")
    if not cov.passed:
        raise GateFailure(f"coverage {cov.ratio:.1%} below the {cov.threshold:.0%} threshold")
    write_chain_file(run.path("chains"), snaps)
    run.path("calendar").write_text("date\n" + "".join(d.isoformat() + "\n" for d in cal.dates), encoding="utf-8")


def stage_gex(run: Run) -> None:
    _need(run, "gex", run.path("chains"))
    cfg = run.config
    snaps = load_chain_file(run.path("chains"))
    source = GreeksSource(cfg.gex.greeks_source)
    profiles = [compute_gex(s, source, thresholds=cfg.thresholds, rate=cfg.gex.rate) for s in snaps]
    write_gex_csv(run.path("gex"), profiles)
    write_strike_gex_csv(run.path("strike_gex"), profiles)


def stage_rules(run: Run) -> None:
    _need(run, "rules", run.path("gex"))
    profiles = read_gex_csv(run.path("gex"))
    write_signals_csv(run.path("signals"), [(p.as_of, evaluate_all(p, run.config.thresholds)) for p in profiles])


def stage_obfuscate(run: Run) -> None:
    _need(run, "obfuscate", run.path("gex"), run.path("signals"))
    cfg = run.config
    profiles = read_gex_csv(run.path("gex"), cfg.data.ticker)
    signals = read_signals_csv(run.path("signals"))
    template = TemplateKind(cfg.detect.template)
    items = [(p.as_of, p) for p in profiles]
    cases = []
    for window in trailing_windows(items, cfg.obfuscation.window):
        last = window[-1][0]
        hint = None
        if template is TemplateKind.BIASED:
            hint = [s.kind.value for s in signals.get(last, []) if s.triggered]
        cases.append(obfuscate(window, ticker=cfg.data.ticker, seed=cfg.obfuscation.seed,
                               template=template, hint=hint))
    write_cases(run.path("cases"), cases)
    prov = run.path("provenance")
    prov.parent.mkdir(parents=True, exist_ok=True)
    os.chmod(prov.parent, 0o700)
    write_provenance(prov, cases)
    os.chmod(prov, 0o600)


def _agent(run: Run, cases, provenance):
    cfg = run.config.detect
    if cfg.agent == "mock":
        signals = read_signals_csv(run.path("signals"))
        by_case = {c.case_id: signals.get(provenance[c.case_id].dates[-1], []) for c in cases}
        return MockAgent({c.case_id: c for c in cases}, by_case)
    return HttpAgent(AgentConfig(endpoint=cfg.endpoint, model_name=cfg.model_name, batch_size=cfg.batch_size,
                                 max_in_flight=cfg.max_in_flight, max_attempts=cfg.max_attempts,
                                 backoff_base=cfg.backoff_base, timeout=cfg.timeout,
                                 temperature=cfg.temperature, api_key_env=cfg.api_key_env))


def stage_detect(run: Run) -> None:
    _need(run, "detect", run.path("cases"), run.path("provenance"), run.path("signals"))
    cfg = run.config
    provenance = read_provenance(run.path("provenance"))
    cases = read_cases(run.path("cases"), provenance)
    template = default_template(TemplateKind(cfg.detect.template))
    agent = _agent(run, cases, provenance)
    journal = DetectionJournal(run.path("journal"))
    focuses = list(PatternKind) if cfg.detect.framing == "per_pattern" else [None]
    results = []
    for focus in focuses:
        results.extend(run_batch(cases, template, agent, batch_size=cfg.detect.batch_size,
                                 max_in_flight=cfg.detect.max_in_flight, focus=focus, journal=journal,
                                 thresholds=cfg.thresholds))
    write_detections(run.path("detections"), results)
    # the journal only exists to resume an interrupted stage
    run.path("journal").unlink(missing_ok=True)


def _case_dates(run: Run) -> dict[str, date]:
    return {cid: k.dates[-1] for cid, k in read_provenance(run.path("provenance")).items()}


def stage_outcomes(run: Run) -> None:
    _need(run, "outcomes", run.path("detections"), run.path("provenance"), run.path("gex"), run.bars_source())
    bars = load_bars_file(run.bars_source())
    profiles = {p.as_of: p for p in read_gex_csv(run.path("gex"))}
    records = score_detections(read_detections(run.path("detections")), bars, _case_dates(run), profiles,
                               thresholds=run.config.thresholds)
    write_outcomes_csv(run.path("outcomes"), records)


def stage_validate(run: Run) -> None:
    _need(run, "validate", run.path("detections"), run.path("outcomes"), run.path("provenance"),
          run.path("gex"), run.bars_source())
    st = run.config.stats
    report = build_report(read_detections(run.path("detections")), read_outcomes_csv(run.path("outcomes")),
                          case_dates=_case_dates(run), profiles=read_gex_csv(run.path("gex")),
                          bars=load_bars_file(run.bars_source()),
                          mode=MaterializationMode(run.config.outcomes.mode), alpha=st.alpha, p0=st.p0,
                          bootstrap_iterations=st.bootstrap_iterations, bootstrap_seed=st.bootstrap_seed,
                          tc_per_trade=st.tc_per_trade)
    write_report(run.root, report)


SPECS = {
    "synth": StageSpec("synth", stage_synth, lambda r: [],
                       lambda r: [r.path("synth_chains"), r.path("synth_bars"), r.path("synth_truth")]),
    "ingest": StageSpec("ingest", stage_ingest, lambda r: [r.chains_source()],
                        lambda r: [r.path("chains"), r.path("calendar"), r.path("coverage")]),
    "gex": StageSpec("gex", stage_gex, lambda r: [r.path("chains")],
                     lambda r: [r.path("gex"), r.path("strike_gex")]),
    "rules": StageSpec("rules", stage_rules, lambda r: [r.path("gex")], lambda r: [r.path("signals")]),
    "obfuscate": StageSpec("obfuscate", stage_obfuscate, lambda r: [r.path("gex"), r.path("signals")],
                           lambda r: [r.path("cases"), r.path("provenance")]),
    "detect": StageSpec("detect", stage_detect,
                        lambda r: [r.path("cases"), r.path("provenance"), r.path("signals")],
                        lambda r: [r.path("detections")]),
    "outcomes": StageSpec("outcomes", stage_outcomes,
                          lambda r: [r.path("detections"), r.path("provenance"), r.path("gex"), r.bars_source()],
                          lambda r: [r.path("outcomes")]),
    "validate": StageSpec("validate", stage_validate,
                          lambda r: [r.path("detections"), r.path("outcomes"), r.path("provenance"),
                                     r.path("gex"), r.bars_source()],
                          lambda r: [r.path("report")] + [r.root / "report_tables" / f"{t}.csv" for t in TABLES]),
}


def _up_to_date(run: Run, manifest: dict, spec: StageSpec) -> bool:
    entry = manifest.get("stages", {}).get(spec.name)
    if not entry or manifest.get("config_hash") != run.config.hash:
        return False
    outs = run.checksums(spec.outputs(run))
    return (entry.get("inputs") == run.checksums(spec.inputs(run)) and entry.get("outputs") == outs
            and all(v is not None for v in outs.values()))


def run_stage(run: Run, name: str, *, force: bool = False) -> bool:
    """Run one stage unless it is up to date; True when it actually ran."""
    spec = SPECS[name]
    manifest = run.load_manifest()
    if manifest.get("config_hash") != run.config.hash:
        # a different config invalidates every recorded stage
        manifest = {"config_hash": run.config.hash, "versions": versions(), "stages": {}}
    if not force and _up_to_date(run, manifest, spec):
        log.info("stage %s: up to date, skipped", name)
        return False
    run.root.mkdir(parents=True, exist_ok=True)
    log.info("stage %s: running", name)
    try:
        spec.fn(run)
    except StageError:
        raise
    except GateFailure as exc:
        raise StageError(name, MODULES[name], str(exc), exit_code=2) from exc
    except ProviderUnavailable as exc:
        raise StageError(name, MODULES[name], str(exc), exit_code=3) from exc
    except (GexProbeError, OSError, ValueError, KeyError) as exc:
        raise StageError(name, MODULES[name], f"{type(exc).__name__}: {exc}") from exc
    manifest["versions"] = versions()
    manifest.setdefault("stages", {})[name] = {"inputs": run.checksums(spec.inputs(run)),
                                               "outputs": run.checksums(spec.outputs(run))}
    run.save_manifest(manifest)
    return True


def pipeline_stages(config: RunConfig) -> list[str]:
    return [s for s in STAGES if s != "synth" or config.data.source == "synth"]


def run_pipeline(config: RunConfig, out: str | Path | None = None, *, until: str | None = None,
                 force: bool = False) -> Run:
    """Run every stage in order, stopping after ``until`` when given."""
    run = Run(config, out)
    stages = pipeline_stages(config)
    if until is not None:
        if until not in stages:
            raise ValueError(f"unknown stage {until!r}; choose from {stages}")
        stages = stages[:stages.index(until) + 1]
    for name in stages:
        run_stage(run, name, force=force)
    return run


def verify_manifest(run_dir) -> list[str]:
    """Relative paths whose current checksum differs from the manifest."""
    root = Path(run_dir)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    bad = []
    for entry in manifest.get("stages", {}).values():
        for rel, digest in entry.get("outputs", {}).items():
            p = root / rel if not Path(rel).is_absolute() else Path(rel)
            if not p.exists() or sha256_file(p) != digest:
                bad.append(rel)
    return sorted(set(bad))

"""``gexprobe`` command line.

Exit codes: 0 success, 2 validation gate (leak audit, coverage), 3 provider
unavailable, 1 anything else.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from gexprobe import __version__
from gexprobe.config import RunConfig, load_config, save_config
from gexprobe.errors import GexProbeError, StageError
from gexprobe.pipeline import STAGES, Run, run_pipeline, run_stage, verify_manifest

log = logging.getLogger("gexprobe")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="INI run config (defaults apply when omitted)")
    p.add_argument("--out", metavar="DIR", help="run directory (overrides [run] out)")
    p.add_argument("--template", choices=("unbiased", "biased"))
    p.add_argument("--agent", choices=("mock", "live"))
    p.add_argument("--seed", type=int, metavar="N", help="seed for synthesis, obfuscation and bootstrap")
    p.add_argument("--force", action="store_true", help="rerun stages even when up to date")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gexprobe", description="Dealer-gamma pattern detection pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the pipeline end to end")
    _common(p)
    p.add_argument("--stage", choices=STAGES, help="stop after this stage")

    for name in STAGES:
        _common(sub.add_parser(name, help=f"run only the {name} stage on prior outputs"))

    p = sub.add_parser("report", help="print the headline numbers of a finished run")
    _common(p)
    p = sub.add_parser("verify", help="check run artifacts against manifest checksums")
    _common(p)
    p = sub.add_parser("init-config", help="write a config file with every default filled in")
    p.add_argument("path")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    over: dict = {}
    if args.template:
        over["detect"] = {"template": args.template}
    if args.agent:
        over.setdefault("detect", {})["agent"] = args.agent
    if args.seed is not None:
        over["synth"] = {"seed": args.seed}
        over["obfuscation"] = {"seed": args.seed}
        over["stats"] = {"bootstrap_seed": args.seed}
    if args.out:
        over["out"] = args.out
    return cfg.with_overrides(**over) if over else cfg


def _pct(x):
    return "n/a" if x is None else f"{100 * x:.1f}%"


def print_report(run_dir: Path, stream=None) -> None:
    stream = stream or sys.stdout
    d = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
    f = d["funnel"]
    print(f"tests {f['tests']}  detections {f['detections']}  materialized {f['materialized']}", file=stream)
    print(f"detection rate {_pct(f['detection_rate'])}  accuracy {_pct(f['accuracy'])}  "
          f"overall {_pct(f['overall_success'])}  ({d['mode']})", file=stream)
    for ps in d["per_pattern"]:
        det = ps["detection"]
        rate = _pct(det["rate"]) if det else "n/a"
        print(f"  {ps['pattern']:<20} rate {rate:>7}  accuracy {_pct(ps['accuracy']):>7}  "
              f"p={ps['p_value'] if ps['p_value'] is not None else 'n/a'}  significant={ps['significant']}",
              file=stream)
    if d.get("trend_test_p") is not None:
        print(f"trend p = {d['trend_test_p']:.4f}", file=stream)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "init-config":
        save_config(args.path, RunConfig())
        return 0
    try:
        cfg = resolve_config(args)
        run = Run(cfg)
        if args.command == "run":
            run_pipeline(cfg, until=args.stage, force=args.force)
            print(run.root)
        elif args.command == "report":
            print_report(run.root)
        elif args.command == "verify":
            bad = verify_manifest(run.root)
            for rel in bad:
                print(f"modified: {rel}")
            return 1 if bad else 0
        else:
            ran = run_stage(run, args.command, force=args.force)
            print(f"{args.command}: {'done' if ran else 'up to date'}")
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (GexProbeError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

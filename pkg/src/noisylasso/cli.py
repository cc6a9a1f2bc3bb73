"""Command line entry point: ``noisylasso run|figure|replay|emit``.

Exit status is 0 when every cell succeeded, 1 when some cell failed and 2 on
usage or input errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiments import Scenario, emit, load_result, replay, run_scenario
from .figures import figure_scenarios, run_figure

log = logging.getLogger("noisylasso")


def _cmd_run(args) -> int:
    scenario = Scenario.load(args.scenario)
    result = run_scenario(scenario, args.workers)
    for fmt in args.format or scenario.outputs:
        for path in emit(result, fmt, args.out):
            print(path)
    failed = sum(r["status"] != "ok" for r in result.records)
    if failed:
        log.error("%d of %d trials failed", failed, len(result.records))
    return 0 if result.ok else 1


def _cmd_figure(args) -> int:
    ok, _ = run_figure(args.number, args.quick, args.out, args.seed, tuple(args.format), args.workers)
    print(f"figure {args.number} written to {args.out}")
    return 0 if ok else 1


def _cmd_replay(args) -> int:
    if args.scenario:
        scenario = Scenario.load(args.scenario)
    else:
        scenarios = figure_scenarios(args.figure, args.quick)
        names = [s.name for s in scenarios]
        if args.name not in names:
            raise ValueError(f"--name must be one of {names}")
        scenario = scenarios[names.index(args.name)]
    rec = replay(scenario, args.cell, args.seed)
    print(json.dumps(rec, default=float))
    return 0 if rec["status"] == "ok" else 1


def _cmd_emit(args) -> int:
    result = load_result(args.source, args.name)
    for path in emit(result, args.format, args.out):
        print(path)
    return 0 if result.ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noisylasso", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file (YAML or JSON)")
    r.add_argument("scenario", type=Path)
    r.add_argument("--out", type=Path, default=Path("results"))
    r.add_argument("--format", choices=["csv", "svg"], action="append")
    r.add_argument("--workers", type=int, default=None)
    r.set_defaults(func=_cmd_run)

    f = sub.add_parser("figure", help="run a figure preset")
    f.add_argument("number", type=int, choices=[1, 2, 3, 4])
    f.add_argument("--quick", action="store_true", help="desk-scale profile")
    f.add_argument("--out", type=Path, default=Path("results"))
    f.add_argument("--seed", type=int, default=0, help="master seed")
    f.add_argument("--format", choices=["csv", "svg"], action="append")
    f.add_argument("--workers", type=int, default=None)
    f.set_defaults(func=_cmd_figure)

    p = sub.add_parser("replay", help="re-run one trial from its recorded seed")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cell", type=int, required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=Path, help="scenario file, or an emitted *_scenario.json")
    src.add_argument("--figure", type=int, choices=[1, 3, 4])
    p.add_argument("--name", help="scenario name within the figure preset")
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=_cmd_replay)

    e = sub.add_parser("emit", help="re-render stored CSV results")
    e.add_argument("--format", choices=["csv", "svg"], required=True)
    e.add_argument("--out", type=Path, required=True)
    e.add_argument("--source", type=Path, required=True, help="directory holding the stored results")
    e.add_argument("--name", required=True, help="scenario name")
    e.set_defaults(func=_cmd_emit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    if getattr(args, "format", None) is None and args.command == "figure":
        args.format = ["csv", "svg"]
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

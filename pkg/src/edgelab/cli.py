"""Command line entry point: ``edgelab run | validate | report``."""
from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, load_config
from .pipelines import run_experiment


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for path, msg in exc.problems:
            print(f"error: {path}: {msg}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"ok: {cfg.kind} (config sha256 {cfg.digest()[:12]})")
    return 0


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for path, msg in exc.problems:
            print(f"error: {path}: {msg}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        result = run_experiment(cfg, args.output)
    except OSError as exc:
        print(f"error: output: {exc}", file=sys.stderr)
        return 2
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.6g} (tolerance {c.tolerance:g}) {c.note}".rstrip())
    print(f"status: {result.status}")
    return 0 if result.passed else 1


def _cmd_report(args) -> int:
    path = os.path.join(args.directory, "summary.json")
    try:
        with open(path) as fh:
            summary = json.load(fh)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"kind: {summary['kind']}")
    for c in summary["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']} (tolerance {c['tolerance']})")
    print(json.dumps(summary["statistics"], indent=2))
    print(f"status: {summary['status']}")
    return 0 if summary["status"] == "pass" else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgelab", description="Soft-edge experiments for tridiagonal beta ensembles")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment file")
    r.add_argument("config")
    r.add_argument("-o", "--output", default=None, help="artifact directory (overrides the config)")
    r.set_defaults(func=_cmd_run)
    v = sub.add_parser("validate", help="check an experiment file without running it")
    v.add_argument("config")
    v.set_defaults(func=_cmd_validate)
    rep = sub.add_parser("report", help="print the summary of an artifact directory")
    rep.add_argument("directory")
    rep.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

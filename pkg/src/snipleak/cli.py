"""Command line entry points.

    snipleak run --config scenario.json [--seed N] [--report out.json]
    snipleak matrix [--seed N] [--report out.json] [--check]
    snipleak serve [--port N] [--config scenario.json]

Exit codes: 0 success, 2 bad config, 3 matrix mismatch against the
expected outcomes (with --check).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import api, harness
from .harness import ConfigError, ScenarioConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISMATCH = 3


def _load_config(path: str, seed: int | None) -> ScenarioConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}")
    except ValueError as exc:
        raise ConfigError(f"config: invalid JSON: {exc}")
    cfg = ScenarioConfig.from_dict(raw)
    if seed is not None:
        cfg = ScenarioConfig(**{**cfg.__dict__, "seed": seed})
    return cfg


def _write_report(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config, args.seed)
    report, runtime = harness.run_scenario(cfg)
    payload = report.to_dict()
    print(f"{report.scenario_id}: {report.leak_class.label}")
    for item in report.leaked_items:
        # snippets may span lines; keep each item on one report line
        flat = item.replace("\n", "\\n")
        print(f"  leaked: {flat}")
    _write_report(args.report, payload)
    if args.report:
        transcript = Path(args.report).with_suffix(".transcript.jsonl")
        transcript.write_text(
            "\n".join(runtime.fabric.transcript_lines()) + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_matrix(args: argparse.Namespace) -> int:
    cells = harness.attack_matrix(seed=args.seed)
    rows = [c.to_dict() for c in cells]
    width = max(len(f"{c.attack} x {c.mitigation}") for c in cells)
    for cell in cells:
        name = f"{cell.attack} x {cell.mitigation}"
        mark = "ok" if cell.ok else f"MISMATCH (expected {cell.expected.label})"
        print(f"{name:<{width}}  {cell.leak_class.label:<16} {mark}")
    _write_report(args.report, {"cells": rows})
    if args.check and not all(c.ok for c in cells):
        return EXIT_MISMATCH
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    if args.config:
        cfg = _load_config(args.config, None)
    else:
        cfg = ScenarioConfig(attack="applet")
    api.serve_forever(cfg, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snipleak",
        description="local search result integration testbed")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario from a config file")
    p_run.add_argument("--config", required=True, help="scenario JSON file")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument("--report", default=None, help="write the leak report here")
    p_run.set_defaults(func=_cmd_run)

    p_matrix = sub.add_parser("matrix", help="run every attack x mitigation cell")
    p_matrix.add_argument("--seed", type=int, default=0)
    p_matrix.add_argument("--report", default=None, help="write cell results here")
    p_matrix.add_argument("--check", action="store_true",
                          help="exit 3 if any cell misses its expected outcome")
    p_matrix.set_defaults(func=_cmd_matrix)

    p_serve = sub.add_parser("serve", help="serve the console api")
    p_serve.add_argument("--port", type=int, default=8800)
    p_serve.add_argument("--config", default=None, help="initial scenario JSON file")
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

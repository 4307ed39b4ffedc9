"""Command line entry point: ``qcompat run <scenario.json> ...``.

Exit codes: 0 success, 1 at least one task failed, 2 fatal (parse, validation
or setup construction).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ._validation import Tolerances
from .scenario import (
    ScenarioError,
    SetupError,
    dump_report,
    emit_csv,
    parse_scenario,
    run_scenario,
    write_atomic,
)

EXIT_OK = 0
EXIT_TASK_ERROR = 1
EXIT_FATAL = 2


def _tol_pair(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    name = key if key.startswith("tol_") else f"tol_{key}"
    if name not in Tolerances.names():
        raise argparse.ArgumentTypeError(f"unknown tolerance {key!r}; choose from {', '.join(Tolerances.names())}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {key!r} needs a number, got {value!r}") from None


def _csv_target(text: str) -> tuple[int, str]:
    index, sep, path = text.partition("=")
    if not sep or not index.isdigit() or not path:
        raise argparse.ArgumentTypeError(f"expected <task-index>=<file>, got {text!r}")
    return int(index), path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcompat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file and write a JSON report")
    run.add_argument("scenario", type=Path)
    run.add_argument("--out", type=Path, help="report path (default: stdout)")
    run.add_argument("--csv", type=_csv_target, action="append", default=[], metavar="INDEX=FILE",
                     help="export the sweep table of task INDEX as CSV")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--tol", type=_tol_pair, action="append", default=[], metavar="KEY=VALUE",
                     help="override a tolerance, e.g. --tol tol_product=1e-6")
    run.add_argument("--quiet", action="store_true", help="suppress the per-task summary on stderr")
    return parser


def cmd_run(args) -> int:
    try:
        scenario = parse_scenario(args.scenario.read_bytes())
        scenario = scenario.with_overrides(seed=args.seed, tolerances=dict(args.tol))
        report = run_scenario(scenario)
    except OSError as exc:
        print(f"error: cannot read {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except (ScenarioError, SetupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL

    payload = dump_report(report)
    if args.out is not None:
        write_atomic(args.out, payload)
    else:
        sys.stdout.write(payload.decode("utf-8"))

    status = EXIT_OK if report["ok"] else EXIT_TASK_ERROR
    for index, path in args.csv:
        if index >= len(report["tasks"]):
            print(f"error: --csv task index {index} out of range", file=sys.stderr)
            status = EXIT_TASK_ERROR
            continue
        try:
            write_atomic(path, emit_csv(report["tasks"][index]))
        except ValueError as exc:
            print(f"error: task {index}: {exc}", file=sys.stderr)
            status = EXIT_TASK_ERROR

    if not args.quiet:
        for task in report["tasks"]:
            detail = task.get("error", {}).get("code", "")
            print(f"[{task['index']}] {task['type']}: {task['status']} {detail}".rstrip(), file=sys.stderr)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())

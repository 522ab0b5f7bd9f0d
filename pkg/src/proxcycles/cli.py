"""Command line front end.

::

    proxcycles run --scenario FILE [--report-dir DIR] [--tol T] [--max-iter K] [--seed S]
    proxcycles verify [--seed S] [--tol T]
    proxcycles catalog [--output FILE]

Exit codes: 0 when every requested check passes, 1 on numerical
failures, 2 on unreadable or invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from . import acceptance, catalog
from .scenarios import PASS, ScenarioError, load_scenarios, run_scenario, write_reports

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_INPUT = 2


def _positive_float(text):
    val = float(text)
    if not val > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return val


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxcycles",
                                     description="Cycles and gap vectors of proximal maps composed with roots of the identity.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the tasks of a scenario file")
    run.add_argument("--scenario", required=True, help="scenario JSON file")
    run.add_argument("--report-dir", default="reports", help="output directory (default: reports)")
    run.add_argument("--tol", type=_positive_float, help="override the pass/fail tolerance of every scenario")
    run.add_argument("--max-iter", type=_positive_int, help="override the solver iteration budget")
    run.add_argument("--seed", type=int, help="override the sampling seed of every scenario")

    ver = sub.add_parser("verify", help="run the built-in acceptance suite")
    ver.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
    ver.add_argument("--tol", type=_positive_float, help="loosen every threshold to at least this value")

    cat = sub.add_parser("catalog", help="print the built-in scenarios as a scenario file")
    cat.add_argument("--output", help="write to this file instead of stdout")
    return parser


def cmd_run(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        scenarios = load_scenarios(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INPUT
    reports, traces = [], []
    for sc in scenarios:
        if args.tol is not None:
            sc.tol = args.tol
        if args.max_iter is not None:
            sc.solver = replace(sc.solver, max_iter=args.max_iter)
        if args.seed is not None:
            sc.seed = args.seed
        rep, tr = run_scenario(sc)
        reports.append(rep)
        traces.append(tr)
        print(f"{rep['scenario_id']}: {rep['status']}", file=out)
        for task, entry in rep["tasks"].items():
            line = f"  {task:<14} {entry['status']:<5} max residual {entry['max_residual']:.3e}"
            if "cycle_status" in entry:
                line += f"  [{entry['cycle_status']}]"
            if "error" in entry:
                line += f"  ({entry['error']})"
            elif "reason" in entry:
                line += f"  ({entry['reason']})"
            if entry.get("isometric") is False:
                line += "  [non-isometric root]"
            print(line, file=out)
    write_reports(reports, traces, args.report_dir)
    print(f"reports written to {args.report_dir}", file=out)
    failed = [r["scenario_id"] for r in reports if r["status"] != PASS]
    if failed:
        print(f"failing scenarios: {', '.join(failed)}", file=err)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_verify(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    results = acceptance.run_all(seed=args.seed, tol=args.tol)
    print(acceptance.format_table(results), file=out)
    failed = [r for r in results if not r.passed]
    if failed:
        print("failing: " + "; ".join(f"{r.number}. {r.name}" for r in failed), file=err)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_catalog(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    text = json.dumps({"scenarios": catalog.catalog()}, indent=2) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which matches the input-error code
        return int(exc.code) if exc.code is not None else EXIT_OK
    handler = {"run": cmd_run, "verify": cmd_verify, "catalog": cmd_catalog}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())

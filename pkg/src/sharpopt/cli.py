"""Command-line benchmark runner.

Subcommands:
  run      execute an experiment config, writing trace/report/figure files
  certify  evaluate the certificate suites for a config
  table    render checkpoint rows of a trace CSV as a markdown table
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness


def _parse_checkpoints(text: str) -> list[int]:
    try:
        marks = [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as err:
        raise SystemExit(f"--checkpoints: {err}")
    if sorted(marks) != marks:
        raise SystemExit("--checkpoints: expected an increasing list")
    return marks


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    report = harness.run(cfg, args.out, large_n=args.large_n)
    print(f"{report.name}: status={report.status} "
          f"iterations={report.iterations} f={report.final_objective!r}")
    for kind, path in sorted(report.outputs.items()):
        print(f"  {kind}: {path}")
    failed = [c for c in report.certificates if not c["passed"]]
    for cert in report.certificates:
        verdict = "PASS" if cert["passed"] else "FAIL"
        print(f"  {verdict} {cert['name']}")
    return 1 if failed else 0


def _cmd_certify(args) -> int:
    cfg = harness.load_config(args.config)
    results = harness.run_certificates(cfg, large_n=args.large_n)
    for cert in results:
        verdict = "PASS" if cert.passed else "FAIL"
        detail = f" ({cert.detail})" if cert.detail else ""
        print(f"{verdict} {cert.name}: worst margin {cert.worst:.3e}{detail}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        payload = [cert.__dict__ for cert in results]
        path = out / f"{cfg.name}.certificates.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        print(f"summary: {path}")
    return 0 if all(c.passed for c in results) else 1


def _cmd_table(args) -> int:
    columns, rows = harness.read_trace_csv(args.trace)
    marks = _parse_checkpoints(args.checkpoints)
    text = harness.emit_table_from_rows(columns, rows, marks)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sharpopt",
        description="benchmark runner for the first-order solver library")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--large-n", action="store_true",
                       help="raise the problem dimension to 10^6")
    p_run.set_defaults(func=_cmd_run)

    p_cert = sub.add_parser("certify", help="run the certificate suites")
    p_cert.add_argument("config")
    p_cert.add_argument("--out", default=None,
                        help="directory for the JSON summary")
    p_cert.add_argument("--large-n", action="store_true")
    p_cert.set_defaults(func=_cmd_certify)

    p_table = sub.add_parser("table", help="markdown table from a trace CSV")
    p_table.add_argument("trace")
    p_table.add_argument("--checkpoints", required=True,
                         help="comma-separated iteration numbers")
    p_table.add_argument("--out", default=None, help="write instead of stdout")
    p_table.set_defaults(func=_cmd_table)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (harness.ConfigError, ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line front end.

    solitonscope run <config-file> [--output-dir D] [--stage-until STAGE]
    solitonscope suite <dir>
    solitonscope report <run-dir>
    solitonscope make-config <scenario> <path>

Exit codes: 0 all checks pass, 1 at least one check failed, 2 execution
error.  The only environment override honored is OUTPUT_DIR.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .experiment import (SCENARIOS, STAGES, ExperimentConfig, default_config,
                         regenerate_report, run)


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_file(args.config_file)
    out_dir = args.output_dir or os.environ.get("OUTPUT_DIR")
    if out_dir:
        config.output_dir = out_dir
    report = run(config, stage_until=args.stage_until)
    for name, ok in sorted(report.checks.items()):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    for stage, reason in report.stages_skipped.items():
        print(f"SKIP {stage}: {reason}")
    print(f"report: {Path(config.output_dir) / 'report.json'}")
    return 0 if report.passed else 1


def _cmd_suite(args) -> int:
    configs = sorted(Path(args.directory).glob("*.cfg"))
    if not configs:
        print(f"no .cfg files in {args.directory}", file=sys.stderr)
        return 2
    worst = 0
    for path in configs:
        print(f"== {path.name}")
        run_args = argparse.Namespace(config_file=str(path), output_dir=None,
                                      stage_until=None)
        try:
            code = _cmd_run(run_args)
        except Exception as exc:  # keep the suite going, report at the end
            print(f"ERROR {path.name}: {exc}", file=sys.stderr)
            code = 2
        worst = max(worst, code)
    return worst


def _cmd_report(args) -> int:
    outcome = regenerate_report(args.run_dir)
    for name, ok in sorted(outcome["checks"].items()):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if not outcome["consistent"]:
        print("WARNING: recomputed verdicts differ from the stored report",
              file=sys.stderr)
    return 0 if outcome["passed"] else 1


def _cmd_make_config(args) -> int:
    cfg = default_config(args.scenario)
    cfg.to_file(args.path)
    print(f"wrote {args.path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solitonscope",
        description="radial NLS runs with hydrodynamic and phase diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one experiment config")
    p_run.add_argument("config_file")
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--stage-until", default=None, choices=STAGES)
    p_run.set_defaults(func=_cmd_run)

    p_suite = sub.add_parser("suite", help="run every .cfg in a directory")
    p_suite.add_argument("directory")
    p_suite.set_defaults(func=_cmd_suite)

    p_rep = sub.add_parser("report", help="recompute verdicts from a run dir")
    p_rep.add_argument("run_dir")
    p_rep.set_defaults(func=_cmd_report)

    p_mk = sub.add_parser("make-config",
                          help="write a scenario's default config file")
    p_mk.add_argument("scenario", choices=SCENARIOS)
    p_mk.add_argument("path")
    p_mk.set_defaults(func=_cmd_make_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands: validate, replay, compare, export, live. Exit codes: 0 on
success, 1 on validation errors (bad flags, config, timeline), 2 on runtime
errors. Diagnostics go to stderr; tables to stdout; machine output to files.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from .cgroup import CgroupError, CgroupWriter, prepare_fake_tree
from .config import ConfigError, ControllerConfig, load_config
from .controller import Controller, ControllerError, ScoreError
from .replay import (
    VARIANTS,
    ReplayError,
    compare,
    emit_comparison,
    emit_traces,
    replay as run_replay,
    summary_rows,
)
from .simulator import SimulatorError
from .taskgraph import GraphValidationError
from .timeline import Timeline, TimelineError, load_timeline

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

_VALIDATION_ERRORS = (ConfigError, TimelineError, ReplayError,
                      GraphValidationError, ScoreError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # bad argv is a validation failure, not exit 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ctxsched",
                     description="Context-aware scheduling: validate configs, "
                                 "replay timelines, compare scheduler variants.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, timeline_required=True):
        p.add_argument("--config", required=True, help="controller config (TOML)")
        p.add_argument("--timeline", required=timeline_required,
                       help="timeline JSON file")
        p.add_argument("--processors", type=int, help="override processor count")
        p.add_argument("--period-us", type=int, help="override RT period")
        p.add_argument("--quantum-us", type=int, help="override simulator quantum")

    p = sub.add_parser("validate", help="check a config (and optional timeline)")
    common(p, timeline_required=False)

    p = sub.add_parser("replay", help="replay one scheduler variant")
    common(p)
    p.add_argument("--variant", choices=VARIANTS, default="cfs_ca")
    p.add_argument("--out", help="directory for CSV traces and figures")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("compare", help="run baseline, cfs_ca and rt_ca")
    common(p)
    p.add_argument("--out", help="directory for per-variant traces and summary")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("export", help="replay and write traces only")
    common(p)
    p.add_argument("--variant", choices=VARIANTS, default="cfs_ca")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("live", help="drive a cgroup tree from a timeline")
    common(p)
    p.add_argument("--cgroup-root", required=True,
                   help="directory containing one cgroup per module")
    p.add_argument("--i-have-cgroup-permissions", action="store_true",
                   help="required safety latch; the writer refuses without it")
    p.add_argument("--fake-tree", action="store_true",
                   help="create a writable stand-in tree under --cgroup-root")
    p.add_argument("--wall-clock", action="store_true",
                   help="pace events in real time instead of virtual time")
    return parser


def _load(args) -> tuple[ControllerConfig, Timeline | None]:
    config = load_config(args.config)
    overrides = {}
    if args.processors is not None:
        overrides["processors"] = args.processors
    if args.period_us is not None:
        overrides["period_us"] = args.period_us
    if args.quantum_us is not None:
        overrides["quantum_us"] = args.quantum_us
    if overrides:
        from .config import validate_config
        config = validate_config(replace(config, **overrides))
    timeline = load_timeline(args.timeline) if getattr(args, "timeline", None) else None
    return config, timeline


def _print_report_table(reports) -> None:
    print(f"{'variant':<10} {'module':<14} {'total_ms':>12} {'makespan_ms':>12} {'speedup':>8}")
    for report in reports:
        for variant, module, total, makespan, speedup in summary_rows(report):
            sp = f"{speedup:.3f}" if speedup is not None else "-"
            print(f"{variant:<10} {module:<14} {total:>12.1f} {makespan:>12.1f} {sp:>8}")


def _cmd_validate(args) -> int:
    config, timeline = _load(args)
    print(f"config ok: {len(config.modules)} modules, {len(config.rules)} rules, "
          f"mode={config.mode}, N={config.processors}")
    if timeline is not None:
        print(f"timeline ok: {timeline.name or '(unnamed)'}, "
              f"{len(timeline.entries)} entries, {timeline.duration_ms} ms")
        for entry in timeline.entries:
            if entry.stream not in config.inputs:
                raise ReplayError(
                    f"timeline stream {entry.stream!r} is not declared in the config")
    return EXIT_OK


def _cmd_replay(args) -> int:
    config, timeline = _load(args)
    report, trace = run_replay(timeline, config, args.variant)
    _print_report_table([report])
    print(f"events={report.total_events} recomputes={report.recompute_count} "
          f"skipped_jobs={sum(report.skipped_jobs.values())}")
    if args.out:
        paths = emit_traces(report, trace, args.out, figures=not args.no_figures)
        trace.write_csv(Path(args.out) / "trace.csv")
        for p in paths + [Path(args.out) / "trace.csv"]:
            print(f"wrote {p}", file=sys.stderr)
    return EXIT_OK


def _cmd_compare(args) -> int:
    config, timeline = _load(args)
    results = compare(timeline, config)
    _print_report_table([r for r, _ in results.values()])
    if args.out:
        for p in emit_comparison(results, args.out, figures=not args.no_figures):
            print(f"wrote {p}", file=sys.stderr)
    return EXIT_OK


def _cmd_export(args) -> int:
    config, timeline = _load(args)
    report, trace = run_replay(timeline, config, args.variant)
    emit_traces(report, trace, args.out, figures=not args.no_figures)
    trace.write_csv(Path(args.out) / "trace.csv")
    return EXIT_OK


def _cmd_live(args) -> int:
    if not args.i_have_cgroup_permissions:
        print("refusing to touch cgroups without --i-have-cgroup-permissions",
              file=sys.stderr)
        return EXIT_VALIDATION
    config, timeline = _load(args)
    root = Path(args.cgroup_root)
    if args.fake_tree:
        targets = prepare_fake_tree(root, config.module_ids(), config.mode)
    else:
        targets = {m: root / m for m in config.module_ids()}
    writer = CgroupWriter(targets, enabled=True)
    controller = Controller(config, backend=writer)
    controller.initialize()
    start = time.monotonic()
    applied = 1
    for entry in timeline.entries:
        if args.wall_clock:
            lag = entry.t_ms / 1000.0 - (time.monotonic() - start)
            if lag > 0:
                time.sleep(lag)
        if controller.on_event(entry.stream, entry.payload, entry.t_ms * 1000):
            applied += 1
    print(f"applied {applied} assignments to {root}")
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "replay": _cmd_replay,
    "compare": _cmd_compare,
    "export": _cmd_export,
    "live": _cmd_live,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _VALIDATION_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SimulatorError, ControllerError, CgroupError, OSError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

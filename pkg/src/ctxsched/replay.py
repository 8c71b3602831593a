"""Replay timelines against scheduler variants and collect metrics.

``replay`` advances a virtual clock over the timeline: each entry is fed to
the controller (for the context-aware variants) and, when its stream is
owned by a module, becomes a simulator job of the entry's cost. A job whose
module is frozen at the arrival instant (allocation in effect equals zero,
i.e. an active context rule has zeroed it and the kernel-side setting has
caught up) is skipped entirely: a gated task processes no input. Under RT
the setting only catches up at the next period boundary, so RT sheds less
gated work than CFS, which is the response-lag effect.

``compare`` runs baseline / cfs_ca / rt_ca on the identical entry sequence
(the per-variant input digests are asserted equal) and reports speedups
normalized to the baseline makespan.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .config import CFS, RT, ControllerConfig
from .controller import Controller, ScheduleAssignment
from .simulator import JobResult, SimJob, SimMachine, SimTrace, SimulatorBackend, sim_run
from .taskgraph import NodeKind
from .timeline import Timeline

log = logging.getLogger("ctxsched.replay")

BASELINE = "baseline"
CFS_CA = "cfs_ca"
RT_CA = "rt_ca"
VARIANTS = (BASELINE, CFS_CA, RT_CA)


class ReplayError(Exception):
    pass


@dataclass
class MetricsReport:
    variant: str
    per_module_exec_ms: dict[str, float]
    makespan_ms: float
    recompute_count: int
    total_events: int
    weight_trace: list[tuple[int, str, float]]
    share_trace: list[tuple[int, str, float]]
    jobs: list[JobResult]
    skipped_jobs: dict[str, int]
    input_digest: str
    speedup: Optional[float] = None  # filled by compare(); baseline is 1.0

    @property
    def total_exec_ms(self) -> float:
        return sum(self.per_module_exec_ms.values())


def _machine(config: ControllerConfig) -> SimMachine:
    return SimMachine(config.processors, config.quantum_us, config.period_us)


def _warn_admission(config: ControllerConfig, machine: SimMachine) -> None:
    # Capability constraints are advisory: log, never reject.
    for m in config.modules:
        if m.graph is None:
            continue
        for node in m.graph.nodes:
            if node.kind is NodeKind.CAPABILITY and (node.cores or 0) > machine.processors:
                log.warning("module %s: constraint %s wants %d cores, machine has %d",
                            m.module_id, node.name, node.cores, machine.processors)


class _EffectiveAllocations:
    """Tracks the allocation in force at any instant, per the backend mode."""

    def __init__(self, mode: str, machine: SimMachine):
        self._step = machine.period_us if mode == RT else machine.quantum_us
        self._changes: list[tuple[int, dict[str, float]]] = []

    def push(self, assignment: ScheduleAssignment) -> None:
        step = self._step
        effective = -(-assignment.time_us // step) * step
        if self._changes and self._changes[-1][0] == effective:
            self._changes[-1] = (effective, dict(assignment.entries))
        else:
            self._changes.append((effective, dict(assignment.entries)))

    def at(self, time_us: int) -> dict[str, float]:
        current: dict[str, float] = {}
        for effective, entries in self._changes:
            if effective <= time_us:
                current = entries
            else:
                break
        return current


def _digest_entry(digest, entry) -> None:
    digest.update(json.dumps(
        [entry.t_ms, entry.stream, entry.payload, entry.work_us],
        sort_keys=True).encode())


def replay(timeline: Timeline, config: ControllerConfig, variant: str,
           ) -> tuple[MetricsReport, SimTrace]:
    """Run one scheduler variant over the timeline; returns metrics and trace."""
    if variant not in VARIANTS:
        raise ReplayError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    machine = _machine(config)
    _warn_admission(config, machine)

    controller: Controller | None = None
    backend = SimulatorBackend()
    if variant != BASELINE:
        mode = RT if variant == RT_CA else CFS
        controller = Controller(replace(config, mode=mode), backend=backend)
        initial = controller.initialize()
        effective = _EffectiveAllocations(mode, machine)
        effective.push(initial)

    owners = {s: config.stream_owner(s) for s in config.inputs}
    digest = hashlib.sha256()
    jobs: list[SimJob] = []
    skipped: dict[str, int] = {m: 0 for m in config.module_ids()}

    for entry in timeline.entries:
        if entry.stream not in owners:
            raise ReplayError(f"stream {entry.stream!r} is not declared in the config")
        _digest_entry(digest, entry)
        t_us = entry.t_ms * 1000
        owner = owners[entry.stream]
        if owner is not None:
            work = entry.work_us
            if work is None:
                work = config.module(owner).work_us
            if work is None:
                raise ReplayError(
                    f"entry at {entry.t_ms} ms: module {owner!r} has no work mapping "
                    f"(no work_us on the entry and no module default)")
            gated = (controller is not None
                     and effective.at(t_us).get(owner, 1.0) == 0.0)
            if gated:
                skipped[owner] += 1
            else:
                jobs.append(SimJob(owner, t_us, work))
        if controller is not None:
            assignment = controller.on_event(entry.stream, entry.payload, t_us)
            if assignment is not None:
                effective.push(assignment)

    if controller is not None:
        assignments = backend.assignments
        weight_trace = list(controller.weight_trace)
        recomputes = controller.assignments_emitted
    else:
        equal = machine.processors / len(config.modules)
        assignments = [ScheduleAssignment(
            CFS, {m: equal for m in config.module_ids()}, epoch=0, time_us=0)]
        weight_trace = []
        recomputes = 0

    trace = sim_run(jobs, assignments, machine)
    report = MetricsReport(
        variant=variant,
        per_module_exec_ms={m: trace.per_module_exec_us.get(m, 0.0) / 1000.0
                            for m in config.module_ids()},
        makespan_ms=trace.makespan_us / 1000.0,
        recompute_count=recomputes,
        total_events=len(timeline.entries),
        weight_trace=weight_trace,
        share_trace=list(trace.allocations),
        jobs=list(trace.completions),
        skipped_jobs=skipped,
        input_digest=digest.hexdigest(),
    )
    return report, trace


def compare(timeline: Timeline, config: ControllerConfig,
            ) -> dict[str, tuple[MetricsReport, SimTrace]]:
    """Run all three variants on identical inputs; speedups vs baseline."""
    results = {variant: replay(timeline, config, variant) for variant in VARIANTS}
    digests = {r.input_digest for r, _ in results.values()}
    if len(digests) != 1:
        raise ReplayError("variants consumed different input sequences")
    base_makespan = results[BASELINE][0].makespan_ms
    for variant, (report, _) in results.items():
        if report.makespan_ms == 0 and base_makespan == 0:
            report.speedup = 1.0
        elif report.makespan_ms == 0:
            report.speedup = float("inf")
        else:
            report.speedup = base_makespan / report.makespan_ms
    return results


# -- trace emission -----------------------------------------------------------


def _write_csv(path: Path, header: str, rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(v) for v in row) + "\n")
    return path


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def summary_rows(report: MetricsReport) -> list[tuple]:
    rows = [(report.variant, m, report.per_module_exec_ms[m],
             report.makespan_ms, report.speedup)
            for m in report.per_module_exec_ms]
    rows.append((report.variant, "all", report.total_exec_ms,
                 report.makespan_ms, report.speedup))
    return rows


def emit_traces(report: MetricsReport, trace: SimTrace, out_dir: str | Path,
                figures: bool = True) -> list[Path]:
    """Write weights.csv, shares.csv, jobs.csv, summary.csv (and figures)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [
        _write_csv(out / "weights.csv", "time_us,module,weight", report.weight_trace),
        _write_csv(out / "shares.csv", "time_us,module,share", report.share_trace),
        _write_csv(out / "jobs.csv", "module,arrival_us,work_us,completion_us",
                   [(j.module_id, j.arrival_us, j.work_us, j.completion_us)
                    for j in report.jobs]),
        _write_csv(out / "summary.csv", "variant,module,total_ms,makespan_ms,speedup",
                   summary_rows(report)),
    ]
    if figures:
        from . import plots
        paths.append(plots.plot_series(
            report.weight_trace, out / "weights.png",
            ylabel="weight", title=f"{report.variant}: scheduling weights"))
        paths.append(plots.plot_series(
            report.share_trace, out / "shares.png",
            ylabel="share" if trace.mode == CFS else "slice (us)",
            title=f"{report.variant}: allotted CPU"))
    return paths


def emit_comparison(results: dict[str, tuple[MetricsReport, SimTrace]],
                    out_dir: str | Path, figures: bool = True) -> list[Path]:
    """Per-variant trace directories plus a combined summary (and figure)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    rows: list[tuple] = []
    for variant, (report, trace) in results.items():
        paths.extend(emit_traces(report, trace, out / variant, figures=figures))
        rows.extend(summary_rows(report))
    paths.append(_write_csv(out / "summary.csv",
                            "variant,module,total_ms,makespan_ms,speedup", rows))
    if figures:
        from . import plots
        speedups = {v: r.speedup or 1.0 for v, (r, _) in results.items()}
        paths.append(plots.plot_speedups(speedups, out / "speedup.png"))
    return paths

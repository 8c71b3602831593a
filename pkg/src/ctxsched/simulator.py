"""Deterministic discrete-time CPU simulator for schedule assignments.

The model, which the test suite's independent reference re-implements
quantum by quantum:

Time advances in quanta of ``quantum_us``. Jobs are single-threaded
(at most 1 core each); a job is runnable in a quantum iff it arrived at or
before the quantum start and is unfinished. Assignments take effect at the
first quantum boundary at/after their decision time under CFS, and at the
first *period* boundary under RT (this is the RT response lag). When
several assignments share an effective boundary the highest epoch wins.

CFS quantum: runnable modules receive rates proportional to their current
share, renormalized over runnable modules and water-filled against a cap of
one core per runnable job. If every runnable module's share is zero the
weights fall back to equal (work-conserving); with ``strict_cap=True``
shares hard-cap consumption instead (cpu.max semantics) and zero-share
modules freeze. A module's rate splits equally over its runnable jobs. Per
quantum, job consumption in whole microseconds is the largest-remainder
rounding of rate*quantum (ties to the lower job index). A job finishing
inside a quantum completes at ``start + min(quantum, ceil(remaining/rate))``
and its unused entitlement is not redistributed within that quantum.

RT quantum: per period each module holds a budget of its slice value;
budgets reset at every period boundary. Each quantum, up to N modules run,
chosen among modules with remaining budget and runnable jobs by least CPU
consumed this period (ties to module order). A chosen module runs its
oldest runnable job on one core for ``min(quantum, budget, remaining)``.
Modules without budget wait for the next period refill.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .config import CFS, RT
from .controller import ScheduleAssignment


class SimulatorError(Exception):
    pass


class StaleEpochError(SimulatorError):
    """An assignment arrived with an epoch at or below the last applied one."""

    def __init__(self, message: str, assignment: ScheduleAssignment):
        super().__init__(message)
        self.assignment = assignment


class SimulationStalledError(SimulatorError):
    """Work remains but no module can ever run again (all slices zero)."""


@dataclass(frozen=True)
class SimMachine:
    processors: int = 1
    quantum_us: int = 1000
    period_us: int = 1_000_000

    def __post_init__(self):
        if self.processors < 1:
            raise SimulatorError("processors must be >= 1")
        if self.quantum_us < 1 or self.period_us % self.quantum_us != 0:
            raise SimulatorError("quantum_us must be >= 1 and divide period_us")


@dataclass(frozen=True)
class SimJob:
    module_id: str
    arrival_us: int
    work_us: int

    def __post_init__(self):
        if self.work_us <= 0:
            raise SimulatorError(f"job work must be positive, got {self.work_us}")
        if self.arrival_us < 0:
            raise SimulatorError("job arrival must be >= 0")


@dataclass(frozen=True)
class JobResult:
    module_id: str
    arrival_us: int
    work_us: int
    completion_us: int


@dataclass
class SimTrace:
    """Execution record: allocations in effect, run intervals, completions."""

    mode: str
    machine: SimMachine
    allocations: list[tuple[int, str, float]] = field(default_factory=list)
    intervals: list[tuple[int, int, str, float, int]] = field(default_factory=list)
    completions: list[JobResult] = field(default_factory=list)
    per_module_cpu_us: dict[str, int] = field(default_factory=dict)
    per_module_exec_us: dict[str, float] = field(default_factory=dict)
    makespan_us: int = 0

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("time_us,module,share_or_slice,cpu_us\n")
            for start, _end, module, rate, cpu in self.intervals:
                fh.write(f"{start},{module},{rate!r},{cpu}\n")


class SimulatorBackend:
    """Assignment sink handed to the controller; feeds sim_run later."""

    def __init__(self):
        self.assignments: list[ScheduleAssignment] = []
        self._last_epoch: Optional[int] = None

    def apply_assignment(self, assignment: ScheduleAssignment) -> None:
        if self._last_epoch is not None and assignment.epoch <= self._last_epoch:
            raise StaleEpochError(
                f"epoch {assignment.epoch} not greater than applied {self._last_epoch}",
                assignment)
        self._last_epoch = assignment.epoch
        self.assignments.append(assignment)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _effective_time(decision_us: int, mode: str, machine: SimMachine) -> int:
    step = machine.period_us if mode == RT else machine.quantum_us
    return _ceil_div(decision_us, step) * step


def _effective_schedule(assignments: Sequence[ScheduleAssignment], mode: str,
                        machine: SimMachine) -> list[tuple[int, ScheduleAssignment]]:
    """(effective_time, assignment) with a single winner per boundary."""
    last_epoch = None
    for a in assignments:
        if a.mode != mode:
            raise SimulatorError(f"assignment epoch {a.epoch} has mode {a.mode!r}, "
                                 f"expected {mode!r}")
        if last_epoch is not None and a.epoch <= last_epoch:
            raise StaleEpochError(f"assignment epochs must increase, got {a.epoch}", a)
        last_epoch = a.epoch
    by_boundary: dict[int, ScheduleAssignment] = {}
    for a in assignments:
        by_boundary[_effective_time(a.time_us, mode, machine)] = a
    return sorted(by_boundary.items())


class _JobState:
    __slots__ = ("job", "index", "remaining", "completion_us")

    def __init__(self, job: SimJob, index: int):
        self.job = job
        self.index = index
        self.remaining = job.work_us
        self.completion_us: Optional[int] = None


def _waterfill(weights: dict[str, Fraction], caps: dict[str, int],
               capacity: Fraction) -> dict[str, Fraction]:
    """Distribute capacity proportionally to weights, capping per module."""
    rates = {m: Fraction(0) for m in weights}
    active = [m for m in weights if weights[m] > 0]
    remaining = capacity
    while active and remaining > 0:
        total_w = sum(weights[m] for m in active)
        over = [m for m in active if remaining * weights[m] / total_w > caps[m]]
        if not over:
            for m in active:
                rates[m] = remaining * weights[m] / total_w
            break
        for m in over:
            rates[m] = Fraction(caps[m])
            remaining -= caps[m]
        active = [m for m in active if m not in over]
    return rates


def _apportion(amounts: list[Fraction]) -> list[int]:
    """Largest-remainder rounding preserving the floored total."""
    floors = [int(a) for a in amounts]
    leftover = int(sum(amounts)) - sum(floors)
    order = sorted(range(len(amounts)),
                   key=lambda i: (-(amounts[i] - floors[i]), i))
    out = floors[:]
    for i in order[:leftover]:
        out[i] += 1
    return out


class _IntervalLog:
    """Accumulates per-module execution intervals, merging equal-rate quanta."""

    def __init__(self):
        self.rows: list[tuple[int, int, str, float, int]] = []
        self._open: dict[str, list] = {}  # module -> [start, end, rate, cpu]
        self.exec_us: dict[str, float] = {}
        self.cpu_us: dict[str, int] = {}

    def record(self, module: str, start: int, end: int, rate: Fraction, cpu: int) -> None:
        if cpu <= 0:
            return
        self.cpu_us[module] = self.cpu_us.get(module, 0) + cpu
        self.exec_us[module] = self.exec_us.get(module, 0.0) + cpu / float(rate)
        cur = self._open.get(module)
        if cur is not None and cur[1] == start and cur[2] == rate:
            cur[1] = end
            cur[3] += cpu
            return
        if cur is not None:
            self._flush(module)
        self._open[module] = [start, end, rate, cpu]

    def _flush(self, module: str) -> None:
        start, end, rate, cpu = self._open.pop(module)
        self.rows.append((start, end, module, float(rate), cpu))

    def close(self) -> None:
        for module in list(self._open):
            self._flush(module)
        self.rows.sort(key=lambda r: (r[0], r[2]))


def sim_run(jobs: Sequence[SimJob], assignments: Sequence[ScheduleAssignment],
            machine: SimMachine, strict_cap: bool = False) -> SimTrace:
    """Run all jobs to completion under the given assignment schedule."""
    for a, b in zip(jobs, jobs[1:]):
        if b.arrival_us < a.arrival_us:
            raise SimulatorError("jobs must be sorted by arrival time")
    if not assignments:
        raise SimulatorError("at least one assignment (the initial policy) is required")
    mode = assignments[0].mode
    modules = list(assignments[0].entries)
    for job in jobs:
        if job.module_id not in modules:
            raise SimulatorError(f"job references unknown module {job.module_id!r}")

    schedule = _effective_schedule(assignments, mode, machine)
    if schedule[0][0] != 0:
        raise SimulatorError("no assignment in effect at time 0")

    trace = SimTrace(mode, machine)
    for t_eff, a in schedule:
        for m in modules:
            trace.allocations.append((t_eff, m, float(a.entries[m])))

    states = [_JobState(job, i) for i, job in enumerate(jobs)]
    if mode == RT:
        _run_rt(states, schedule, machine, trace, modules)
    else:
        _run_cfs(states, schedule, machine, trace, strict_cap)

    trace.completions = [JobResult(s.job.module_id, s.job.arrival_us, s.job.work_us,
                                   s.completion_us or 0)
                         for s in sorted(states, key=lambda s: (s.completion_us, s.index))]
    trace.makespan_us = max((s.completion_us or 0 for s in states), default=0)
    return trace


def baseline_run(jobs: Sequence[SimJob], machine: SimMachine) -> SimTrace:
    """Default-scheduler reference: constant equal shares, no controller."""
    modules = sorted({j.module_id for j in jobs})
    if not modules:
        return SimTrace(CFS, machine)
    equal = ScheduleAssignment(
        CFS, {m: machine.processors / len(modules) for m in modules}, epoch=0, time_us=0)
    return sim_run(jobs, [equal], machine, strict_cap=False)


# -- CFS ----------------------------------------------------------------------


def _run_cfs(states: list[_JobState], schedule: list[tuple[int, ScheduleAssignment]],
             machine: SimMachine, trace: SimTrace, strict_cap: bool) -> None:
    q = machine.quantum_us
    n_cores = machine.processors
    t = 0
    next_arrival_idx = 0
    pending = list(schedule)
    shares: dict[str, float] = {}
    run: list[_JobState] = []

    log = _IntervalLog()
    while True:
        while pending and pending[0][0] <= t:
            shares = dict(pending.pop(0)[1].entries)
        while next_arrival_idx < len(states) and states[next_arrival_idx].job.arrival_us <= t:
            run.append(states[next_arrival_idx])
            next_arrival_idx += 1
        if not run:
            if next_arrival_idx >= len(states):
                break
            # Idle: jump to the quantum boundary where the next job is visible.
            targets = [_ceil_div(states[next_arrival_idx].job.arrival_us, q) * q]
            if pending:
                targets.append(pending[0][0])
            t = max(min(targets), t + q)
            continue

        rates = _cfs_rates(run, shares, n_cores, strict_cap)
        charges = _apportion([rates[id(s)] * q for s in run])
        if sum(charges) == 0:
            # Only possible under strict caps: every runnable module frozen.
            if not pending and next_arrival_idx >= len(states):
                raise SimulationStalledError(
                    "work remains but every runnable module is frozen at zero share")
            t += q
            continue

        # Batch quanta while nothing can change the rate vector.
        horizon = []
        if pending:
            horizon.append((pending[0][0] - t) // q)
        if next_arrival_idx < len(states):
            horizon.append(
                (_ceil_div(states[next_arrival_idx].job.arrival_us, q) * q - t) // q)
        for s, c in zip(run, charges):
            if c > 0:
                horizon.append(_ceil_div(s.remaining, c))
        steps = min(horizon) if horizon else 1
        if steps > 1:
            # All but the final quantum are full-consumption, completion-free.
            span = (steps - 1) * q
            for s, c in zip(run, charges):
                if c > 0:
                    s.remaining -= c * (steps - 1)
                    log.record(s.job.module_id, t, t + span, rates[id(s)], c * (steps - 1))
            t += span
            continue

        for s, c in zip(run, charges):
            if c <= 0:
                continue
            consumed = min(c, s.remaining)
            if consumed >= s.remaining:
                wall = min(q, math.ceil(s.remaining / rates[id(s)]))
                s.completion_us = t + wall
                consumed = s.remaining
            log.record(s.job.module_id, t, t + q, rates[id(s)], consumed)
            s.remaining -= consumed
        run = [s for s in run if s.remaining > 0]
        t += q

    log.close()
    trace.intervals = log.rows
    trace.per_module_cpu_us = log.cpu_us
    trace.per_module_exec_us = log.exec_us


def _cfs_rates(run: list[_JobState], shares: dict[str, float], n_cores: int,
               strict_cap: bool) -> dict[int, Fraction]:
    """Per-job rates (cores) for one quantum; keyed by id(job state)."""
    job_count: dict[str, int] = {}
    for s in run:
        job_count[s.job.module_id] = job_count.get(s.job.module_id, 0) + 1
    mods = list(job_count)
    weights = {m: Fraction(shares.get(m, 0.0)).limit_denominator(10**9) for m in mods}

    if strict_cap:
        module_rates = {m: min(weights[m], Fraction(job_count[m])) for m in mods}
    else:
        if all(w == 0 for w in weights.values()):
            weights = {m: Fraction(1) for m in mods}
        capacity = Fraction(min(n_cores, sum(job_count.values())))
        module_rates = _waterfill(weights, job_count, capacity)

    rates: dict[int, Fraction] = {}
    for s in run:
        m = s.job.module_id
        rates[id(s)] = module_rates[m] / job_count[m]
    return rates


# -- RT -----------------------------------------------------------------------


def _run_rt(states: list[_JobState], schedule: list[tuple[int, ScheduleAssignment]],
            machine: SimMachine, trace: SimTrace, modules: list[str]) -> None:
    q = machine.quantum_us
    period = machine.period_us
    n_cores = machine.processors
    order = {m: i for i, m in enumerate(modules)}
    t = 0
    next_arrival_idx = 0
    pending = list(schedule)
    slices: dict[str, int] = {}
    budget: dict[str, int] = {}
    consumed_period: dict[str, int] = {m: 0 for m in modules}
    active: list[_JobState] = []
    log = _IntervalLog()

    def refill() -> None:
        for m in modules:
            budget[m] = int(slices.get(m, 0))
            consumed_period[m] = 0

    while True:
        if t % period == 0:
            while pending and pending[0][0] <= t:
                slices = dict(pending.pop(0)[1].entries)
            refill()
        while next_arrival_idx < len(states) and states[next_arrival_idx].job.arrival_us <= t:
            active.append(states[next_arrival_idx])
            next_arrival_idx += 1
        if not active and next_arrival_idx >= len(states):
            break

        by_module: dict[str, list[_JobState]] = {}
        for s in active:
            by_module.setdefault(s.job.module_id, []).append(s)
        eligible = [m for m in modules if budget.get(m, 0) > 0 and m in by_module]

        if not eligible:
            # Nothing can run before the next refill, arrival, or assignment.
            if (next_arrival_idx >= len(states) and not pending
                    and all(slices.get(m, 0) <= 0 for m in by_module)):
                raise SimulationStalledError(
                    "work remains but every module with work has a zero slice")
            targets = [(t // period + 1) * period]
            if next_arrival_idx < len(states):
                targets.append(
                    _ceil_div(states[next_arrival_idx].job.arrival_us, q) * q)
            target = min(targets)
            # Never jump over a period boundary: refills happen there.
            boundary = (target // period) * period
            t = max(t + q, boundary if boundary > t else target)
            continue

        chosen = sorted(eligible, key=lambda m: (consumed_period[m], order[m]))[:n_cores]
        for m in chosen:
            job = min(by_module[m], key=lambda s: (s.job.arrival_us, s.index))
            run_us = min(q, budget[m], job.remaining)
            if run_us <= 0:
                continue
            if run_us >= job.remaining:
                job.completion_us = t + job.remaining
            log.record(m, t, t + q, Fraction(1), run_us)
            budget[m] -= run_us
            consumed_period[m] += run_us
            job.remaining -= run_us
        active = [s for s in active if s.remaining > 0]
        t += q

    log.close()
    trace.intervals = log.rows
    trace.per_module_cpu_us = log.cpu_us
    trace.per_module_exec_us = log.exec_us

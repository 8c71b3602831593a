"""Event-driven controller: scores in, CPU assignments out.

Per-module score functions are stream expressions instantiated on a
StreamHub; their latest values, scaled by the module's base priority and
overridden by any active context rule, form the weight set. On every input
event the controller re-evaluates the weights and, only when at least one
weight changed, computes a new assignment:

* CFS mode: share  s_c = N * w_c / sum(w)   (fractional cores)
* RT mode:  slice  t_c = P * w_c / sum(w)   (whole microseconds, floored)

If every weight is zero the assignment falls back to equal split rather
than starving all modules. Assignments carry a monotonically increasing
epoch and are pushed to the configured scheduler backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping, Optional, Protocol

from . import exprs
from .config import CFS, RT, ContextRule, ControllerConfig
from .streams import ObservableStream, StreamHub
from .taskgraph import ContextOverlay

SUM_TOLERANCE = 1e-9


class ControllerError(Exception):
    pass


class ScoreError(ControllerError):
    """A score set is empty, negative, or not finite."""


@dataclass(frozen=True)
class SchedulingScore:
    """One module's scheduling weight (non-negative, finite)."""

    module_id: str
    w: float

    def __post_init__(self):
        if not math.isfinite(self.w) or self.w < 0:
            raise ScoreError(f"score for {self.module_id!r} must be finite and >= 0, "
                             f"got {self.w}")


@dataclass(frozen=True)
class ScheduleAssignment:
    """Map from module to CPU share (CFS, cores) or time-slice (RT, us)."""

    mode: str
    entries: Mapping[str, float]
    epoch: int = 0
    time_us: int = 0


def _validated(scores: Mapping[str, float]) -> dict[str, float]:
    if not scores:
        raise ScoreError("empty score set")
    out = {}
    for module_id, w in scores.items():
        out[module_id] = SchedulingScore(module_id, float(w)).w
    return out


def compute_cfs_shares(scores: Mapping[str, float], processors: int) -> ScheduleAssignment:
    """Proportional CPU shares; equal split when every weight is zero."""
    ws = _validated(scores)
    total = sum(ws.values())
    if total > 0:
        entries = {m: processors * w / total for m, w in ws.items()}
    else:
        entries = {m: processors / len(ws) for m in ws}
    return ScheduleAssignment(CFS, entries)


def compute_rt_slices(scores: Mapping[str, float], period_us: int) -> ScheduleAssignment:
    """Per-period RT runtime budgets in whole microseconds (floored)."""
    ws = _validated(scores)
    total = sum(ws.values())
    if total > 0:
        entries = {m: int(period_us * w / total) for m, w in ws.items()}
    else:
        entries = {m: period_us // len(ws) for m in ws}
    return ScheduleAssignment(RT, entries)


def apply_context_rules(scores: Mapping[str, float],
                        rule_states: Iterable[tuple[ContextRule, bool]]) -> dict[str, float]:
    """Replace each ruled module's weight with the forced value while active.

    Multiple active rules on one module resolve to the lowest forced value,
    so the result is independent of rule order.
    """
    forced: dict[str, float] = {}
    for rule, active in rule_states:
        if active and rule.module_id in scores:
            f = rule.forced_weight
            forced[rule.module_id] = min(forced.get(rule.module_id, f), f)
    out = dict(scores)
    out.update(forced)
    return out


def rule_from_overlay(overlay: ContextOverlay, module_id: str) -> ContextRule:
    """Translate a graph overlay into a score rule.

    The overlay's conditions state when the task may run; the rule forces the
    weight while any of them fails.
    """
    parts = [f"({n.expr})" for n in overlay.nodes if n.expr]
    if not parts:
        raise ControllerError("overlay has no condition predicates")
    return ContextRule(
        module_id=module_id,
        condition_expr="not (" + " and ".join(parts) + ")",
        forced_weight=overlay.weight_override or 0.0,
    )


class SchedulerBackend(Protocol):
    def apply_assignment(self, assignment: ScheduleAssignment) -> None: ...


class Controller:
    """Owns the score streams and pushes epoch-ordered assignments.

    Runs entirely on the hub's dispatcher; on_event is never re-entered.
    """

    def __init__(self, config: ControllerConfig, backend: SchedulerBackend | None = None,
                 hub: StreamHub | None = None):
        self.config = config
        self.backend = backend
        self.hub = hub or StreamHub()
        for name in config.inputs:
            if name not in self.hub:
                self.hub.create_stream(name)

        self._rules = [(r, exprs.parse(r.condition_expr)) for r in config.rules]
        self._scores: dict[str, float] = {}
        self._score_streams: dict[str, ObservableStream] = {}
        self._constant_streams: list[tuple[ObservableStream, float]] = []
        self._build_score_streams()
        self._aggregated = self.hub.combine_latest(
            list(self._score_streams.values()), stream_id="scores")

        self._weights: dict[str, float] = {}
        self._epoch = 0
        self._initialized = False
        self._last_assignment_ts: int | None = None
        self.weight_trace: list[tuple[int, str, float]] = []
        self.assignments_emitted = 0  # on_event emissions, excluding the initial policy

    # -- construction -------------------------------------------------------

    def _build_score_streams(self) -> None:
        for m in self.config.modules:
            priority = m.base_priority
            if m.score_expr is None:
                expr = None
                names: list[str] = []
            else:
                expr = exprs.parse(m.score_expr)
                names = sorted(expr.names)

            if not names:
                # Constant score: the stream fires once, at initialization.
                value = priority * max(expr.evaluate({}), 0.0) if expr else priority
                stream = self.hub.create_stream(f"score:{m.module_id}")
                self._constant_streams.append((stream, value))
                self._scores[m.module_id] = value
            else:
                def make_eval(ex, names, prio):
                    if len(names) == 1:
                        return lambda payload: max(prio * ex.evaluate({names[0]: payload}), 0.0)
                    return lambda tup: max(prio * ex.evaluate(dict(zip(names, tup))), 0.0)

                if len(names) == 1:
                    parent = self.hub.stream(names[0])
                else:
                    parent = self.hub.combine_latest(
                        [self.hub.stream(n) for n in names],
                        stream_id=f"score:{m.module_id}~inputs")
                stream = parent.map(make_eval(expr, names, priority),
                                    stream_id=f"score:{m.module_id}")
                self._scores[m.module_id] = priority  # expression defaults to 1 until it fires

            self._score_streams[m.module_id] = stream
            stream.subscribe(self._make_score_sink(m.module_id))

    def _make_score_sink(self, module_id: str):
        def sink(event):
            self._scores[module_id] = event.payload
        return sink

    def instantiate_scores(self) -> ObservableStream:
        """The combined stream emitting the entire score set as a tuple."""
        return self._aggregated

    def score_stream(self, module_id: str) -> ObservableStream:
        return self._score_streams[module_id]

    @property
    def score_relevant_streams(self) -> frozenset[str]:
        """Input streams that can move a weight: score inputs plus rule inputs."""
        names: set[str] = set()
        for m in self.config.modules:
            if m.score_expr:
                names |= exprs.parse(m.score_expr).names
        for rule, expr in self._rules:
            names |= expr.names
        return frozenset(names)

    # -- weights -------------------------------------------------------------

    def _rule_states(self) -> list[tuple[ContextRule, bool]]:
        env = {name: self.hub.stream(name).latest for name in self.config.inputs
               if self.hub.stream(name).event_count > 0}
        states = []
        for rule, expr in self._rules:
            try:
                active = expr.is_true(env)
            except exprs.ExprEvalError:
                active = False  # silent or malformed inputs leave the rule inert
            states.append((rule, active))
        return states

    def effective_weights(self) -> dict[str, float]:
        """Current per-module weights with context rules applied."""
        return apply_context_rules(dict(self._scores), self._rule_states())

    # -- lifecycle -----------------------------------------------------------

    def initialize(self) -> ScheduleAssignment:
        """Compute and apply the initial policy (epoch 0) from base priorities."""
        if self._initialized:
            raise ControllerError("controller already initialized")
        for stream, value in self._constant_streams:
            stream.emit(value, 0)
        self._initialized = True
        self._weights = self.effective_weights()
        assignment = self._make_assignment(0)
        self._push(assignment)
        return assignment

    def on_event(self, stream_id: str, payload: Any, timestamp_us: int,
                 ) -> Optional[ScheduleAssignment]:
        """Feed one event; returns the new assignment iff a weight changed."""
        if not self._initialized:
            raise ControllerError("on_event before initialize()")
        self.hub.emit(stream_id, payload, timestamp_us)
        weights = self.effective_weights()
        if weights == self._weights:
            return None
        interval = self.config.recompute_interval_us
        if (interval > 0 and self._last_assignment_ts is not None
                and timestamp_us < self._last_assignment_ts + interval):
            return None  # coalesced; the next event past the window catches up
        self._weights = weights
        self._epoch += 1
        assignment = self._make_assignment(timestamp_us)
        self._push(assignment)
        self.assignments_emitted += 1
        return assignment

    def _make_assignment(self, time_us: int) -> ScheduleAssignment:
        if self.config.mode == RT:
            assignment = compute_rt_slices(self._weights, self.config.period_us)
        else:
            assignment = compute_cfs_shares(self._weights, self.config.processors)
        return replace(assignment, epoch=self._epoch, time_us=time_us)

    def _push(self, assignment: ScheduleAssignment) -> None:
        self._last_assignment_ts = assignment.time_us
        for module_id in self.config.module_ids():
            self.weight_trace.append(
                (assignment.time_us, module_id, self._weights[module_id]))
        if self.backend is not None:
            self.backend.apply_assignment(assignment)

"""Task graphs: subtasks, pre-conditions and capability constraints.

A task is represented by its subtasks plus a directed relationship graph:
condition nodes gate subtasks (edge condition -> subtask), subtask order is
expressed subtask -> subtask, and resource needs hang off subtasks as
capability nodes (edge subtask -> capability). Graphs are immutable;
context overlays produce a new graph value and can be removed to recover
the original exactly.

Satisfaction rules for complex tasks use the shared expression grammar over
subtask names, e.g. ``k_of(2, detect, track, plan)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Mapping

from . import exprs


class GraphValidationError(Exception):
    """The graph description violates a structural rule."""


class GraphStateError(Exception):
    """A query was made with an incomplete state mapping."""


class NodeKind(str, Enum):
    SUBTASK = "subtask"
    PRECONDITION = "precondition"
    CONTEXT = "context"
    CAPABILITY = "capability"


class TaskVariant(str, Enum):
    ELEMENTAL = "elemental"
    COMPOUND = "compound"
    COMPLEX = "complex"


_CONDITION_KINDS = (NodeKind.PRECONDITION, NodeKind.CONTEXT)


@dataclass(frozen=True)
class GraphNode:
    name: str
    kind: NodeKind
    expr: str | None = None        # condition nodes: predicate over stream values
    cores: int | None = None       # capability nodes
    memory_mb: float | None = None


@dataclass(frozen=True)
class ContextOverlay:
    """Context-condition nodes/edges to graft onto one task's graph."""

    task_id: str
    nodes: tuple[GraphNode, ...] = ()
    edges: tuple[tuple[str, str], ...] = ()
    weight_override: float | None = None  # score forced while a condition fails


@dataclass(frozen=True)
class TaskGraph:
    task_id: str
    variant: TaskVariant
    nodes: tuple[GraphNode, ...]
    edges: tuple[tuple[str, str], ...]
    rule: str | None = None        # complex tasks: satisfaction over subtask names

    def node(self, name: str) -> GraphNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    @property
    def subtasks(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes if n.kind is NodeKind.SUBTASK)

    def predecessors(self, name: str, kinds: tuple[NodeKind, ...]) -> list[GraphNode]:
        by_name = {n.name: n for n in self.nodes}
        return [by_name[src] for src, dst in self.edges
                if dst == name and by_name[src].kind in kinds]

    def stream_names(self) -> frozenset[str]:
        """All stream names referenced by condition predicates."""
        names: set[str] = set()
        for n in self.nodes:
            if n.kind in _CONDITION_KINDS and n.expr:
                names |= exprs.parse(n.expr).names
        return frozenset(names)


def _check_dag(nodes: Iterable[str], edges: Iterable[tuple[str, str]], task_id: str) -> None:
    names = set(nodes)
    out: dict[str, list[str]] = {n: [] for n in names}
    indeg = {n: 0 for n in names}
    for src, dst in edges:
        if src not in names or dst not in names:
            raise GraphValidationError(
                f"task {task_id!r}: edge ({src!r}, {dst!r}) references a missing node")
        out[src].append(dst)
        indeg[dst] += 1
    queue = [n for n in indeg if indeg[n] == 0]
    seen = 0
    while queue:
        n = queue.pop()
        seen += 1
        for m in out[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    if seen != len(names):
        raise GraphValidationError(f"task {task_id!r}: relationship graph contains a cycle")


def _validate(graph: TaskGraph) -> TaskGraph:
    seen: set[str] = set()
    for n in graph.nodes:
        if n.name in seen:
            raise GraphValidationError(f"task {graph.task_id!r}: duplicate node {n.name!r}")
        seen.add(n.name)
        if n.kind is NodeKind.CAPABILITY:
            if n.cores is None or n.cores < 1:
                raise GraphValidationError(f"constraint {n.name!r}: cores must be >= 1")
            if n.memory_mb is None or n.memory_mb <= 0:
                raise GraphValidationError(f"constraint {n.name!r}: memory must be positive")
        if n.kind in _CONDITION_KINDS:
            if not n.expr:
                raise GraphValidationError(f"condition {n.name!r}: missing predicate")
            exprs.parse(n.expr)  # surfaces syntax errors at build time

    _check_dag(seen, graph.edges, graph.task_id)

    subtasks = set(graph.subtasks)
    if not subtasks:
        raise GraphValidationError(f"task {graph.task_id!r}: no subtask nodes")
    by_name = {n.name: n for n in graph.nodes}
    for n in graph.nodes:
        if n.kind is NodeKind.CAPABILITY:
            touching = {src for src, dst in graph.edges if dst == n.name}
            touching |= {dst for src, dst in graph.edges if src == n.name}
            if not any(by_name[t].kind is NodeKind.SUBTASK for t in touching):
                raise GraphValidationError(
                    f"constraint {n.name!r} is not attached to any subtask")

    if graph.variant is TaskVariant.ELEMENTAL and len(subtasks) != 1:
        raise GraphValidationError(
            f"elemental task {graph.task_id!r} must have exactly one subtask")
    if graph.variant is TaskVariant.COMPLEX:
        if not graph.rule:
            raise GraphValidationError(f"complex task {graph.task_id!r} needs a rule")
        unknown = exprs.parse(graph.rule).names - subtasks
        if unknown:
            raise GraphValidationError(
                f"task {graph.task_id!r}: rule references unknown subtasks {sorted(unknown)}")
    elif graph.rule:
        raise GraphValidationError(
            f"task {graph.task_id!r}: only complex tasks take a satisfaction rule")
    return graph


def build_graph(description: Mapping[str, Any]) -> TaskGraph:
    """Build and validate a TaskGraph from a plain description mapping.

    Schema: ``task_id`` (required), ``kind`` (elemental|compound|complex,
    defaulted from the subtask count), ``subtasks`` (list of names; defaults
    to the task id itself), ``edges`` (pairs of node names), ``rule``
    (complex only), ``conditions`` (list of {name, kind, expr, applies_to}),
    ``constraints`` (list of {name, cores, memory_mb, applies_to}).
    """
    task_id = description.get("task_id")
    if not task_id:
        raise GraphValidationError("task description missing task_id")
    subtask_names = list(description.get("subtasks") or [task_id])

    nodes = [GraphNode(name, NodeKind.SUBTASK) for name in subtask_names]
    edges = [tuple(e) for e in description.get("edges", [])]

    for cond in description.get("conditions", []):
        kind = NodeKind(cond.get("kind", "precondition"))
        if kind not in _CONDITION_KINDS:
            raise GraphValidationError(f"condition {cond.get('name')!r}: bad kind {kind}")
        nodes.append(GraphNode(cond["name"], kind, expr=cond.get("expr")))
        for target in cond.get("applies_to", []):
            edges.append((cond["name"], target))

    for cons in description.get("constraints", []):
        nodes.append(GraphNode(cons["name"], NodeKind.CAPABILITY,
                               cores=cons.get("cores"), memory_mb=cons.get("memory_mb")))
        for target in cons.get("applies_to", []):
            edges.append((target, cons["name"]))

    default_kind = "elemental" if len(subtask_names) == 1 else "compound"
    variant = TaskVariant(description.get("kind", default_kind))
    graph = TaskGraph(task_id, variant, tuple(nodes), tuple(edges),
                      rule=description.get("rule"))
    return _validate(graph)


def apply_overlay(graph: TaskGraph, overlay: ContextOverlay) -> TaskGraph:
    """Return a new graph with the overlay's context nodes grafted in."""
    if overlay.task_id != graph.task_id:
        raise GraphValidationError(
            f"overlay targets {overlay.task_id!r}, graph is {graph.task_id!r}")
    for n in overlay.nodes:
        if n.kind is not NodeKind.CONTEXT:
            raise GraphValidationError(f"overlay node {n.name!r} must be a context condition")
    merged = replace(graph, nodes=graph.nodes + overlay.nodes,
                     edges=graph.edges + overlay.edges)
    return _validate(merged)


def remove_overlay(graph: TaskGraph, overlay: ContextOverlay) -> TaskGraph:
    """Undo apply_overlay; the result is structurally equal to the original."""
    names = {n.name for n in overlay.nodes}
    return replace(
        graph,
        nodes=tuple(n for n in graph.nodes if n.name not in names),
        edges=tuple(e for e in graph.edges if e not in overlay.edges),
    )


def is_satisfied(graph: TaskGraph, completion_state: Mapping[str, bool]) -> bool:
    """Whether the task is satisfied under the given subtask completion map."""
    states = {}
    for name in graph.subtasks:
        if name not in completion_state:
            raise GraphStateError(f"completion state missing subtask {name!r}")
        states[name] = bool(completion_state[name])
    if graph.variant is TaskVariant.COMPLEX:
        env = {name: (1.0 if done else 0.0) for name, done in states.items()}
        return exprs.parse(graph.rule or "0").is_true(env)
    # elemental degenerates to the conjunction over its single subtask
    return all(states.values())


def ready_subtasks(graph: TaskGraph, stream_state: Mapping[str, Any],
                   completion_state: Mapping[str, bool]) -> set[str]:
    """Subtasks whose predecessors are done and whose conditions all hold."""
    missing = graph.stream_names() - set(stream_state)
    if missing:
        raise GraphStateError(
            f"stream state missing referenced stream(s): {', '.join(sorted(missing))}")
    ready: set[str] = set()
    for name in graph.subtasks:
        if completion_state.get(name):
            continue
        preds = graph.predecessors(name, (NodeKind.SUBTASK,))
        if not all(completion_state.get(p.name, False) for p in preds):
            continue
        conditions = graph.predecessors(name, _CONDITION_KINDS)
        if all(exprs.parse(c.expr or "1").is_true(stream_state) for c in conditions):
            ready.add(name)
    return ready

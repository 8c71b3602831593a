"""Controller configuration: parsing, validation and lossless re-emission.

The config file is TOML with three sections plus a top-level ``inputs``
list naming the external input streams::

    inputs = ["imu", "camera", "mic"]

    [scheduler]
    mode = "cfs"              # "cfs" | "rt"
    processors = 1            # N >= 1
    period_us = 1000000       # RT period P, 0 < P <= 1_000_000
    quantum_us = 1000         # simulator quantum; must divide period_us
    recompute_interval_us = 0 # coalesce assignment bursts; 0 = every event

    [[modules]]
    id = "slam"
    priority = 3.0            # > 0; weight = priority * score_expr (default 1)
    score_expr = "1 + (imu.mag > 0.5)"
    job_streams = ["camera"]  # events on these streams are this module's work
    work_us = 120000          # default job cost for entries without work_us

    [modules.graph]           # optional task graph (see taskgraph.build_graph)
    kind = "compound"
    subtasks = ["track", "map"]
    edges = [["track", "map"]]

    [[rules]]
    module = "speech"
    condition_expr = "imu.mag > 0.5"
    forced_weight = 0.0       # applied while the condition holds

``load_config(dump_config(cfg))`` reproduces the same configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib  # type: ignore[no-redef]

from . import exprs
from .taskgraph import GraphValidationError, TaskGraph, build_graph

CFS = "cfs"
RT = "rt"

MAX_PERIOD_US = 1_000_000  # RT slices live in (0 us, 1 s]


class ConfigError(Exception):
    """Base class for configuration diagnostics."""


class ConfigParseError(ConfigError):
    """The file is not valid TOML or has a malformed section."""


class UnresolvedStreamError(ConfigError):
    """An expression references a stream that is not a declared input."""


class InvalidPriorityError(ConfigError):
    """A module priority is zero or negative."""


@dataclass(frozen=True)
class ModuleDescriptor:
    module_id: str
    base_priority: float
    score_expr: str | None = None
    job_streams: tuple[str, ...] = ()
    work_us: int | None = None
    graph: TaskGraph | None = None
    graph_description: Mapping[str, Any] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ContextRule:
    module_id: str
    condition_expr: str
    forced_weight: float = 0.0


@dataclass(frozen=True)
class ControllerConfig:
    modules: tuple[ModuleDescriptor, ...]
    rules: tuple[ContextRule, ...] = ()
    mode: str = CFS
    processors: int = 1
    period_us: int = MAX_PERIOD_US
    quantum_us: int = 1000
    recompute_interval_us: int = 0
    inputs: tuple[str, ...] = ()

    def module(self, module_id: str) -> ModuleDescriptor:
        for m in self.modules:
            if m.module_id == module_id:
                return m
        raise KeyError(module_id)

    def module_ids(self) -> tuple[str, ...]:
        return tuple(m.module_id for m in self.modules)

    def stream_owner(self, stream: str) -> str | None:
        for m in self.modules:
            if stream in m.job_streams:
                return m.module_id
        return None


def _expr_streams(text: str, what: str) -> frozenset[str]:
    try:
        return exprs.parse(text).names
    except exprs.ExprSyntaxError as err:
        raise ConfigParseError(f"{what}: {err}") from None


def _check_streams(names: frozenset[str], inputs: set[str], what: str) -> None:
    unknown = names - inputs
    if unknown:
        raise UnresolvedStreamError(
            f"{what} references undeclared stream(s): {', '.join(sorted(unknown))}")


def validate_config(config: ControllerConfig) -> ControllerConfig:
    if not config.modules:
        raise ConfigError("no modules configured; nothing to schedule")
    if config.mode not in (CFS, RT):
        raise ConfigError(f"scheduler mode must be 'cfs' or 'rt', got {config.mode!r}")
    if config.processors < 1:
        raise ConfigError(f"processors must be >= 1, got {config.processors}")
    if not 0 < config.period_us <= MAX_PERIOD_US:
        raise ConfigError(
            f"period_us must be in (0, {MAX_PERIOD_US}], got {config.period_us}")
    if config.quantum_us < 1 or config.period_us % config.quantum_us != 0:
        raise ConfigError(
            f"quantum_us ({config.quantum_us}) must be >= 1 and divide "
            f"period_us ({config.period_us})")
    if config.recompute_interval_us < 0:
        raise ConfigError("recompute_interval_us must be >= 0")

    inputs = set(config.inputs)
    seen_ids: set[str] = set()
    owners: dict[str, str] = {}
    for m in config.modules:
        if m.module_id in seen_ids:
            raise ConfigError(f"duplicate module id {m.module_id!r}")
        seen_ids.add(m.module_id)
        if not m.base_priority > 0:
            raise InvalidPriorityError(
                f"module {m.module_id!r}: priority must be > 0, got {m.base_priority}")
        if m.score_expr is not None:
            _check_streams(_expr_streams(m.score_expr, f"module {m.module_id!r} score_expr"),
                           inputs, f"module {m.module_id!r} score_expr")
        if m.work_us is not None and m.work_us <= 0:
            raise ConfigError(f"module {m.module_id!r}: work_us must be positive")
        for s in m.job_streams:
            if s not in inputs:
                raise UnresolvedStreamError(
                    f"module {m.module_id!r} job stream {s!r} is not a declared input")
            if s in owners:
                raise ConfigError(
                    f"stream {s!r} owned by both {owners[s]!r} and {m.module_id!r}")
            owners[s] = m.module_id
        if m.graph is not None:
            _check_streams(m.graph.stream_names(), inputs,
                           f"module {m.module_id!r} graph conditions")

    for r in config.rules:
        if r.module_id not in seen_ids:
            raise ConfigError(f"rule targets unknown module {r.module_id!r}")
        if r.forced_weight < 0:
            raise ConfigError(
                f"rule on {r.module_id!r}: forced_weight must be >= 0")
        _check_streams(_expr_streams(r.condition_expr, f"rule on {r.module_id!r}"),
                       inputs, f"rule on {r.module_id!r} condition")
    return config


def _parse_module(table: Mapping[str, Any]) -> ModuleDescriptor:
    if "id" not in table:
        raise ConfigParseError("module entry missing 'id'")
    module_id = str(table["id"])
    graph_desc = table.get("graph")
    graph = None
    if graph_desc is not None:
        try:
            graph = build_graph({"task_id": module_id, **graph_desc})
        except GraphValidationError as err:
            raise ConfigError(f"module {module_id!r}: {err}") from None
    work_us = table.get("work_us")
    return ModuleDescriptor(
        module_id=module_id,
        base_priority=float(table.get("priority", 1.0)),
        score_expr=table.get("score_expr"),
        job_streams=tuple(table.get("job_streams", ())),
        work_us=int(work_us) if work_us is not None else None,
        graph=graph,
        graph_description=graph_desc,
    )


def loads_config(text: str) -> ControllerConfig:
    """Parse and validate configuration from TOML text."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigParseError(f"config does not parse: {err}") from None

    sched = raw.get("scheduler", {})
    if not isinstance(sched, Mapping):
        raise ConfigParseError("[scheduler] must be a table")
    modules_raw = raw.get("modules", [])
    if not isinstance(modules_raw, list):
        raise ConfigParseError("[[modules]] must be an array of tables")
    rules_raw = raw.get("rules", [])

    rules = []
    for r in rules_raw:
        if "module" not in r or "condition_expr" not in r:
            raise ConfigParseError("rule entries need 'module' and 'condition_expr'")
        rules.append(ContextRule(
            module_id=str(r["module"]),
            condition_expr=str(r["condition_expr"]),
            forced_weight=float(r.get("forced_weight", 0.0)),
        ))

    config = ControllerConfig(
        modules=tuple(_parse_module(t) for t in modules_raw),
        rules=tuple(rules),
        mode=str(sched.get("mode", CFS)).lower(),
        processors=int(sched.get("processors", 1)),
        period_us=int(sched.get("period_us", MAX_PERIOD_US)),
        quantum_us=int(sched.get("quantum_us", 1000)),
        recompute_interval_us=int(sched.get("recompute_interval_us", 0)),
        inputs=tuple(raw.get("inputs", ())),
    )
    return validate_config(config)


def load_config(path: str | Path) -> ControllerConfig:
    """Load and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigParseError(f"cannot read config {path}: {err}") from None
    return loads_config(text)


# -- lossless re-emission ---------------------------------------------------


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot emit {type(value).__name__} as TOML")


def dump_config(config: ControllerConfig) -> str:
    """Emit the configuration back as TOML; load_config round-trips it."""
    lines = [f"inputs = {_toml_value(list(config.inputs))}", ""]
    lines += [
        "[scheduler]",
        f'mode = "{config.mode}"',
        f"processors = {config.processors}",
        f"period_us = {config.period_us}",
        f"quantum_us = {config.quantum_us}",
        f"recompute_interval_us = {config.recompute_interval_us}",
        "",
    ]
    for m in config.modules:
        lines.append("[[modules]]")
        lines.append(f"id = {_toml_value(m.module_id)}")
        lines.append(f"priority = {_toml_value(m.base_priority)}")
        if m.score_expr is not None:
            lines.append(f"score_expr = {_toml_value(m.score_expr)}")
        if m.job_streams:
            lines.append(f"job_streams = {_toml_value(list(m.job_streams))}")
        if m.work_us is not None:
            lines.append(f"work_us = {m.work_us}")
        if m.graph_description is not None:
            lines.append("")
            lines.append("[modules.graph]")
            desc = m.graph_description
            for key in ("kind", "subtasks", "edges", "rule"):
                if key in desc:
                    lines.append(f"{key} = {_toml_value(desc[key])}")
            for section in ("conditions", "constraints"):
                for entry in desc.get(section, ()):
                    lines.append("")
                    lines.append(f"[[modules.graph.{section}]]")
                    for k, v in entry.items():
                        lines.append(f"{k} = {_toml_value(v)}")
        lines.append("")
    for r in config.rules:
        lines += [
            "[[rules]]",
            f"module = {_toml_value(r.module_id)}",
            f"condition_expr = {_toml_value(r.condition_expr)}",
            f"forced_weight = {_toml_value(r.forced_weight)}",
            "",
        ]
    return "\n".join(lines)

"""Context-aware task scheduling.

Event-driven per-module scheduling scores computed over reactive streams,
converted into OS-level CPU allocations (CFS proportional shares or RT
time-slices), applied to a deterministic replay simulator or a cgroup tree.
"""

from .config import (
    CFS,
    RT,
    ConfigError,
    ContextRule,
    ControllerConfig,
    ModuleDescriptor,
    dump_config,
    load_config,
    loads_config,
)
from .controller import (
    Controller,
    ScheduleAssignment,
    SchedulingScore,
    ScoreError,
    apply_context_rules,
    compute_cfs_shares,
    compute_rt_slices,
)
from .pubsub import Broker
from .replay import MetricsReport, compare, emit_traces, replay
from .simulator import (
    SimJob,
    SimMachine,
    SimTrace,
    SimulatorBackend,
    baseline_run,
    sim_run,
)
from .streams import Event, ObservableStream, StreamHub
from .taskgraph import (
    ContextOverlay,
    TaskGraph,
    apply_overlay,
    build_graph,
    is_satisfied,
    ready_subtasks,
    remove_overlay,
)
from .timeline import Timeline, TimelineEntry, load_timeline

__version__ = "0.1.0"

__all__ = [
    "CFS", "RT",
    "Broker",
    "ConfigError", "ContextRule", "ControllerConfig", "ModuleDescriptor",
    "Controller", "ScheduleAssignment", "SchedulingScore", "ScoreError",
    "ContextOverlay", "TaskGraph",
    "Event", "ObservableStream", "StreamHub",
    "MetricsReport", "SimJob", "SimMachine", "SimTrace", "SimulatorBackend",
    "Timeline", "TimelineEntry",
    "apply_context_rules", "apply_overlay", "baseline_run", "build_graph",
    "compare", "compute_cfs_shares", "compute_rt_slices", "dump_config",
    "emit_traces", "is_satisfied", "load_config", "load_timeline",
    "loads_config", "ready_subtasks", "remove_overlay", "replay", "sim_run",
    "__version__",
]

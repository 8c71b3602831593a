"""cgroup file writer mirroring the container CPU knobs.

CFS shares map to ``cpu.max`` as ``"<quota_us> <period_us>"`` with a
100 ms period (quota = round(share * period)); RT slices pass through to
the RT runtime file as whole microseconds. The writer is feature-gated:
it refuses to touch the filesystem unless explicitly enabled, and the
default test suite only exercises the formatters plus a fake cgroup tree.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional

from .config import MAX_PERIOD_US, RT
from .controller import ScheduleAssignment

CFS_PERIOD_US = 100_000
CPU_MAX_FILE = "cpu.max"
RT_RUNTIME_FILE = "cpu.rt_runtime_us"


class CgroupError(Exception):
    pass


class CgroupDisabledError(CgroupError):
    """The backend was invoked without being explicitly enabled."""


class CgroupWriteError(CgroupError):
    def __init__(self, path: Path, code: str, detail: str):
        super().__init__(f"{path}: [{code}] {detail}")
        self.path = path
        self.code = code


def format_cpu_max(share: float, period_us: int = CFS_PERIOD_US) -> str:
    """cpu.max content for a fractional-cores share; share 0 freezes."""
    if share < 0:
        raise CgroupError(f"share must be >= 0, got {share}")
    return f"{round(share * period_us)} {period_us}"


def format_rt_runtime(slice_us: int) -> str:
    """RT runtime file content: whole microseconds in [0, 1s]."""
    if not 0 <= slice_us <= MAX_PERIOD_US:
        raise CgroupError(f"slice must be in [0, {MAX_PERIOD_US}] us, got {slice_us}")
    return str(int(slice_us))


def write_cgroup(assignment: ScheduleAssignment, targets: Mapping[str, Path],
                 cfs_period_us: int = CFS_PERIOD_US) -> list[Path]:
    """Write one assignment into per-module cgroup directories."""
    written = []
    for module_id, value in assignment.entries.items():
        if module_id not in targets:
            raise CgroupError(f"no cgroup target for module {module_id!r}")
        root = Path(targets[module_id])
        if assignment.mode == RT:
            path = root / RT_RUNTIME_FILE
            content = format_rt_runtime(int(value))
        else:
            path = root / CPU_MAX_FILE
            content = format_cpu_max(value, cfs_period_us)
        if not root.is_dir():
            raise CgroupWriteError(path, "ENOENT", "cgroup directory missing")
        if assignment.mode != RT and not path.exists():
            # cpu.max absent means the kernel lacks CFS bandwidth control.
            raise CgroupWriteError(
                path, "ENOTSUP", "cpu.max missing; kernel built without "
                "CFS bandwidth control?")
        try:
            path.write_text(content, encoding="ascii")
        except PermissionError as err:
            raise CgroupWriteError(path, "EACCES", str(err)) from None
        except OSError as err:
            raise CgroupWriteError(path, err.__class__.__name__, str(err)) from None
        written.append(path)
    return written


class CgroupWriter:
    """Scheduler backend applying assignments to a live cgroup tree.

    Writes are serialized per epoch; stale epochs are rejected like the
    simulator backend does.
    """

    def __init__(self, targets: Mapping[str, Path], enabled: bool = False,
                 cfs_period_us: int = CFS_PERIOD_US):
        self.targets = {m: Path(p) for m, p in targets.items()}
        self.enabled = enabled
        self.cfs_period_us = cfs_period_us
        self._last_epoch: Optional[int] = None

    def apply_assignment(self, assignment: ScheduleAssignment) -> None:
        if not self.enabled:
            raise CgroupDisabledError(
                "cgroup backend is disabled; enable it explicitly to write")
        if self._last_epoch is not None and assignment.epoch <= self._last_epoch:
            raise CgroupError(
                f"stale epoch {assignment.epoch} (last applied {self._last_epoch})")
        write_cgroup(assignment, self.targets, self.cfs_period_us)
        self._last_epoch = assignment.epoch


def prepare_fake_tree(root: Path, modules, mode: str) -> dict[str, Path]:
    """Create a writable stand-in cgroup tree (for demos and tests)."""
    targets = {}
    for m in modules:
        d = Path(root) / m
        d.mkdir(parents=True, exist_ok=True)
        if mode != RT:
            (d / CPU_MAX_FILE).write_text(f"max {CFS_PERIOD_US}", encoding="ascii")
        targets[m] = d
    return targets

"""Replayable experiment timelines.

A timeline is a JSON file describing timed inputs::

    {"name": "exp1", "duration_ms": 180000,
     "entries": [{"t_ms": 0, "stream": "imu", "payload": {"mag": 0.0},
                  "work_us": 120000, "ground_truth": null}, ...]}

``work_us`` gives the CPU cost of the module job the input triggers; when
absent, the owning module's configured default applies. ``ground_truth`` is
carried through untouched.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

log = logging.getLogger("ctxsched.timeline")


class TimelineError(Exception):
    pass


@dataclass(frozen=True)
class TimelineEntry:
    t_ms: int
    stream: str
    payload: Any
    work_us: int | None = None
    ground_truth: Any = None


@dataclass(frozen=True)
class Timeline:
    name: str
    duration_ms: int
    entries: tuple[TimelineEntry, ...]

    @property
    def duration_us(self) -> int:
        return self.duration_ms * 1000


def _parse_entry(raw: Any, index: int) -> TimelineEntry:
    if not isinstance(raw, dict):
        raise TimelineError(f"entry {index}: expected an object")
    for key in ("t_ms", "stream"):
        if key not in raw:
            raise TimelineError(f"entry {index}: missing {key!r}")
    t_ms = raw["t_ms"]
    if not isinstance(t_ms, int) or t_ms < 0:
        raise TimelineError(f"entry {index}: t_ms must be a non-negative integer")
    work_us = raw.get("work_us")
    if work_us is not None and (not isinstance(work_us, int) or work_us <= 0):
        raise TimelineError(f"entry {index}: work_us must be a positive integer")
    return TimelineEntry(
        t_ms=t_ms,
        stream=str(raw["stream"]),
        payload=raw.get("payload"),
        work_us=work_us,
        ground_truth=raw.get("ground_truth"),
    )


def loads_timeline(text: str, name: str = "") -> Timeline:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise TimelineError(f"timeline does not parse: {err}") from None
    if not isinstance(raw, dict) or "entries" not in raw:
        raise TimelineError("timeline must be an object with an 'entries' array")
    entries = [_parse_entry(e, i) for i, e in enumerate(raw["entries"])]
    if any(b.t_ms < a.t_ms for a, b in zip(entries, entries[1:])):
        log.warning("timeline %s: entries out of order, auto-sorting",
                    raw.get("name", name))
        entries.sort(key=lambda e: e.t_ms)  # stable: same-time entries keep file order
    last = entries[-1].t_ms if entries else 0
    duration_ms = raw.get("duration_ms", last)
    if not isinstance(duration_ms, int) or duration_ms < last:
        raise TimelineError(
            f"duration_ms ({duration_ms}) must cover the last entry at {last} ms")
    return Timeline(str(raw.get("name", name)), duration_ms, tuple(entries))


def load_timeline(path: str | Path) -> Timeline:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise TimelineError(f"cannot read timeline {path}: {err}") from None
    return loads_timeline(text, name=path.stem)

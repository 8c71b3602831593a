"""Minimal reactive-streams engine.

Typed event streams with filter/map/combine-latest operators, synchronous
depth-first propagation and deterministic (registration-order) delivery.
All emissions are serialized through one dispatcher lock, so replaying the
same emission sequence yields identical derived-stream output.

Failing predicates/transforms drop the offending event and bump a
diagnostics counter instead of raising: a degraded stream is better than a
crashed controller.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Optional

EXTERNAL = "external-input"
OPERATOR = "operator"
PUBSUB = "pubsub-topic"

_EMITTABLE_SOURCES = (EXTERNAL, PUBSUB)


class StreamError(Exception):
    """Base class for stream failures."""


class DuplicateStreamError(StreamError):
    """A stream id is already registered."""


class UnknownStreamError(StreamError):
    """Lookup of an unregistered stream id."""


class TimestampError(StreamError):
    """An emission would move a stream's clock backwards."""


@dataclass(frozen=True)
class Event:
    """One value on a stream at a virtual time (microseconds)."""

    stream_id: str
    timestamp_us: int
    payload: Any


class Subscription:
    """Handle for a registered callback; cancel() stops further delivery."""

    def __init__(self, stream: "ObservableStream", callback: Callable[[Event], None]):
        self.stream_id = stream.id
        self.callback = callback
        self.active = True

    def cancel(self) -> None:
        self.active = False


class ObservableStream:
    """A time-ordered sequence of events, combinable with operators."""

    def __init__(self, hub: "StreamHub", stream_id: str, source: str,
                 parents: tuple["ObservableStream", ...] = (), operator: str = ""):
        self._hub = hub
        self.id = stream_id
        self.source = source
        self.parents = parents
        self.operator = operator
        self.last_timestamp_us: Optional[int] = None
        self.latest: Any = None
        self.event_count = 0
        self._sinks: list = []  # Subscriptions and derived-stream links, registration order

    @property
    def operator_chain(self) -> tuple[str, ...]:
        """Operator stages from the nearest source, following single parents."""
        chain: list[str] = []
        node: ObservableStream = self
        while node.source == OPERATOR:
            chain.append(node.operator)
            if len(node.parents) != 1:
                break
            node = node.parents[0]
        return tuple(reversed(chain))

    def subscribe(self, callback: Callable[[Event], None]) -> Subscription:
        sub = Subscription(self, callback)
        self._sinks.append(sub)
        return sub

    def filter(self, predicate: Callable[[Any], bool], stream_id: str | None = None) -> "ObservableStream":
        """Derived stream passing exactly the events whose payload satisfies predicate."""
        return self._hub._derive([self], "filter", lambda p: (predicate(p), p), stream_id)

    def map(self, transform: Callable[[Any], Any], stream_id: str | None = None) -> "ObservableStream":
        """Derived stream with one transformed event per input event, same timestamp."""
        return self._hub._derive([self], "map", lambda p: (True, transform(p)), stream_id)

    def emit(self, payload: Any, timestamp_us: int) -> None:
        self._hub.emit(self, payload, timestamp_us)

    def __repr__(self) -> str:
        return f"ObservableStream({self.id!r}, source={self.source!r})"


class _OperatorLink:
    """Connects one parent stream to a derived stream's update rule."""

    def __init__(self, derived: ObservableStream, parent_index: int):
        self.derived = derived
        self.parent_index = parent_index


class StreamHub:
    """Registry plus single-threaded dispatcher for a family of streams.

    One hub per controller/replay; hubs share nothing, so independent
    replays can run in parallel.
    """

    def __init__(self):
        self._streams: dict[str, ObservableStream] = {}
        self._lock = threading.RLock()
        self._auto_id = 0
        # combine_latest state: derived stream id -> (latest list, seen set)
        self._combine_state: dict[str, tuple[list, set]] = {}
        self.dropped_events: dict[str, int] = {}
        self.dropped_total = 0

    # -- registry ---------------------------------------------------------

    def create_stream(self, stream_id: str, source: str = EXTERNAL) -> ObservableStream:
        """Register a new source stream under a unique id."""
        if source not in _EMITTABLE_SOURCES:
            raise StreamError(f"cannot create source stream of kind {source!r}")
        return self._register(ObservableStream(self, stream_id, source))

    def stream(self, stream_id: str) -> ObservableStream:
        try:
            return self._streams[stream_id]
        except KeyError:
            raise UnknownStreamError(f"no stream registered as {stream_id!r}") from None

    def __contains__(self, stream_id: str) -> bool:
        return stream_id in self._streams

    def stream_ids(self) -> list[str]:
        return list(self._streams)

    def _register(self, stream: ObservableStream) -> ObservableStream:
        if stream.id in self._streams:
            raise DuplicateStreamError(f"stream id {stream.id!r} already registered")
        self._streams[stream.id] = stream
        return stream

    def _next_id(self, base: str, op: str) -> str:
        self._auto_id += 1
        return f"{base}~{op}{self._auto_id}"

    # -- operators ---------------------------------------------------------

    def _derive(self, parents: list[ObservableStream], op: str,
                apply: Callable[[Any], tuple[bool, Any]], stream_id: str | None) -> ObservableStream:
        for p in parents:
            if self._streams.get(p.id) is not p:
                raise UnknownStreamError(f"parent stream {p.id!r} is not registered in this hub")
        derived = ObservableStream(
            self, stream_id or self._next_id(parents[0].id, op), OPERATOR,
            parents=tuple(parents), operator=op)
        derived._apply = apply  # type: ignore[attr-defined]
        self._register(derived)
        linked: set[int] = set()
        for i, p in enumerate(parents):
            if id(p) not in linked:  # one link per distinct parent
                linked.add(id(p))
                p._sinks.append(_OperatorLink(derived, i))
        return derived

    def combine_latest(self, streams: Iterable[ObservableStream],
                       stream_id: str | None = None) -> ObservableStream:
        """Stream of tuples of each input's most recent payload.

        Emits only once every input has emitted at least once, then on every
        input event.
        """
        parents = list(streams)
        if not parents:
            raise StreamError("combine_latest requires at least one input stream")
        derived = self._derive(parents, "combine", lambda p: (True, p), stream_id)
        self._combine_state[derived.id] = ([None] * len(parents), set())
        return derived

    # -- dispatch ----------------------------------------------------------

    def emit(self, stream: ObservableStream | str, payload: Any, timestamp_us: int) -> None:
        """Append an event to a source stream; propagates synchronously."""
        if isinstance(stream, str):
            stream = self.stream(stream)
        if stream.source not in _EMITTABLE_SOURCES:
            raise StreamError(f"cannot emit into derived stream {stream.id!r}")
        if timestamp_us < 0:
            raise TimestampError(f"negative timestamp {timestamp_us}")
        if stream.last_timestamp_us is not None and timestamp_us < stream.last_timestamp_us:
            raise TimestampError(
                f"timestamp regression on {stream.id!r}: "
                f"{timestamp_us} < {stream.last_timestamp_us}")
        with self._lock:
            self._dispatch(stream, Event(stream.id, timestamp_us, payload))

    def _dispatch(self, stream: ObservableStream, event: Event) -> None:
        stream.last_timestamp_us = event.timestamp_us
        stream.latest = event.payload
        stream.event_count += 1
        for sink in list(stream._sinks):
            if isinstance(sink, Subscription):
                if sink.active:
                    sink.callback(event)
            else:
                self._propagate(sink, event)

    def _propagate(self, link: _OperatorLink, event: Event) -> None:
        derived = link.derived
        if derived.operator == "combine":
            latest, seen = self._combine_state[derived.id]
            for i, p in enumerate(derived.parents):
                if p.id == event.stream_id:
                    latest[i] = event.payload
                    seen.add(i)
            if len(seen) < len(derived.parents):
                return
            payload = tuple(latest)
        else:
            try:
                keep, payload = derived._apply(event.payload)  # type: ignore[attr-defined]
            except Exception:
                self.dropped_events[derived.id] = self.dropped_events.get(derived.id, 0) + 1
                self.dropped_total += 1
                return
            if not keep:
                return
        self._dispatch(derived, Event(derived.id, event.timestamp_us, payload))

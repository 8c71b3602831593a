"""In-process publish-subscribe between modules.

Payloads are serialized exactly once per publish into an immutable buffer;
every subscriber sees the same buffer (the shared-memory idiom, minus the
processes). Topics can be wrapped as observable streams so module output
feeds back into the controller.

Late subscribers miss history: there are no retained messages.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass
from typing import Any, Iterator, Mapping, Optional

from .streams import PUBSUB, ObservableStream, StreamHub


class PubSubError(Exception):
    pass


class UnknownTopicError(PubSubError):
    pass


class SchemaError(PubSubError):
    """Payload does not match the topic's schema tag."""


class ReentrantPublishError(PubSubError):
    """A subscriber callback published back into the topic being delivered."""


_SCHEMA_CHECKS = {
    "bytes": lambda p: isinstance(p, bytes),
    "str": lambda p: isinstance(p, str),
    "record": lambda p: isinstance(p, Mapping),
    "scalar": lambda p: isinstance(p, (int, float)) and not isinstance(p, bool),
}


class PayloadHandle:
    """Reference to one immutable serialized buffer."""

    __slots__ = ("buffer", "length", "_kind", "_value", "_decoded")

    def __init__(self, buffer: bytes, kind: str):
        self.buffer = buffer
        self.length = len(buffer)
        self._kind = kind
        self._value: Any = None
        self._decoded = False

    def value(self) -> Any:
        """Decode the buffer back into the published payload (cached)."""
        if not self._decoded:
            if self._kind == "bytes":
                self._value = self.buffer
            elif self._kind == "str":
                self._value = self.buffer.decode("utf-8")
            else:
                self._value = json.loads(self.buffer)
            self._decoded = True
        return self._value


@dataclass(frozen=True)
class Message:
    topic: str
    publisher: str
    sequence: int
    timestamp_us: int
    payload_handle: PayloadHandle

    @property
    def payload(self) -> Any:
        return self.payload_handle.value()


class TopicSubscription:
    """FIFO view of messages published after subscription."""

    def __init__(self, topic: "_Topic"):
        self._topic = topic
        self._queue: deque[Message] = deque()
        self.active = True
        self.high_water = 0  # diagnostics: max queued messages seen

    def _deliver(self, message: Message) -> None:
        self._queue.append(message)
        self.high_water = max(self.high_water, len(self._queue))

    def pop(self) -> Optional[Message]:
        return self._queue.popleft() if self._queue else None

    def __iter__(self) -> Iterator[Message]:
        while self._queue:
            yield self._queue.popleft()

    def __len__(self) -> int:
        return len(self._queue)

    def close(self) -> None:
        self.active = False
        self._topic._subs = [s for s in self._topic._subs if s is not self]


class _Topic:
    def __init__(self, name: str, schema: str | None):
        self.name = name
        self.schema = schema
        self._subs: list[TopicSubscription] = []
        self._bridges: list[ObservableStream] = []
        self._sequences: dict[str, int] = {}
        self._delivering = False


class Broker:
    """Topic registry and delivery fan-out; publish is thread-safe."""

    def __init__(self):
        self._topics: dict[str, _Topic] = {}
        self._lock = threading.RLock()
        self.serialization_count = 0  # diagnostics: one per publish expected

    def create_topic(self, name: str, schema: str | None = None) -> None:
        if name in self._topics:
            raise PubSubError(f"topic {name!r} already exists")
        if schema is not None and schema not in _SCHEMA_CHECKS:
            raise SchemaError(f"unknown schema tag {schema!r}")
        self._topics[name] = _Topic(name, schema)

    def topics(self) -> list[str]:
        return list(self._topics)

    def _topic(self, name: str) -> _Topic:
        try:
            return self._topics[name]
        except KeyError:
            raise UnknownTopicError(f"no topic {name!r}") from None

    def _serialize(self, payload: Any) -> PayloadHandle:
        self.serialization_count += 1
        if isinstance(payload, bytes):
            return PayloadHandle(payload, "bytes")
        if isinstance(payload, str):
            return PayloadHandle(payload.encode("utf-8"), "str")
        return PayloadHandle(json.dumps(payload, sort_keys=True).encode("utf-8"), "json")

    def publish(self, topic_name: str, payload: Any, timestamp_us: int,
                publisher: str = "default") -> Message:
        """Deliver payload to all current subscribers and stream bridges."""
        topic = self._topic(topic_name)
        if topic.schema is not None and not _SCHEMA_CHECKS[topic.schema](payload):
            raise SchemaError(
                f"payload {type(payload).__name__} does not match schema "
                f"{topic.schema!r} of topic {topic_name!r}")
        with self._lock:
            if topic._delivering:
                raise ReentrantPublishError(
                    f"publish to {topic_name!r} from within its own delivery")
            seq = topic._sequences.get(publisher, 0) + 1
            topic._sequences[publisher] = seq
            message = Message(topic_name, publisher, seq, timestamp_us,
                              self._serialize(payload))
            topic._delivering = True
            try:
                for sub in list(topic._subs):
                    if sub.active:
                        sub._deliver(message)
                for bridge in topic._bridges:
                    bridge.emit(payload, timestamp_us)
            finally:
                topic._delivering = False
        return message

    def subscribe(self, topic_name: str) -> TopicSubscription:
        topic = self._topic(topic_name)
        sub = TopicSubscription(topic)
        topic._subs.append(sub)
        return sub

    def topic_as_stream(self, topic_name: str, hub: StreamHub,
                        stream_id: str | None = None) -> ObservableStream:
        """Wrap a topic as an observable stream (one event per later message).

        Each wrap is an independent subscription; wrapping twice yields two
        streams that see identical sequences.
        """
        topic = self._topic(topic_name)
        stream = hub.create_stream(
            stream_id or f"topic:{topic_name}#{len(topic._bridges)}", source=PUBSUB)
        topic._bridges.append(stream)
        return stream

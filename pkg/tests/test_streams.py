import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxsched.streams import (
    DuplicateStreamError,
    StreamError,
    StreamHub,
    TimestampError,
    UnknownStreamError,
)


def collect(stream):
    seen = []
    stream.subscribe(lambda e: seen.append((e.timestamp_us, e.payload)))
    return seen


def payloads(seen):
    return [p for _, p in seen]


def test_create_stream_registers_unique_id():
    hub = StreamHub()
    imu = hub.create_stream("imu")
    assert imu.source == "external-input"
    assert hub.stream("imu") is imu
    with pytest.raises(DuplicateStreamError):
        hub.create_stream("imu")


def test_unknown_stream_lookup():
    hub = StreamHub()
    with pytest.raises(UnknownStreamError):
        hub.stream("nope")


def test_filter_passes_matching_events_in_order():
    hub = StreamHub()
    src = hub.create_stream("n")
    seen = collect(src.filter(lambda v: v % 2 == 0))
    for i, v in enumerate([1, 2, 3, 4]):
        src.emit(v, i)
    assert payloads(seen) == [2, 4]


def test_filter_always_true_is_identity():
    hub = StreamHub()
    src = hub.create_stream("n")
    seen = collect(src.filter(lambda v: True))
    for i in range(5):
        src.emit(i, i)
    assert payloads(seen) == list(range(5))


def test_imu_nonzero_vector_filter():
    hub = StreamHub()
    imu = hub.create_stream("imu")
    nonzero = imu.filter(lambda v: v["x"] != 0 and v["y"] != 0 and v["z"] != 0)
    seen = collect(nonzero)
    imu.emit({"x": 0, "y": 1, "z": 1}, 0)
    imu.emit({"x": 2, "y": 1, "z": 1}, 1)
    assert payloads(seen) == [{"x": 2, "y": 1, "z": 1}]


def test_map_identity_and_linear():
    hub = StreamHub()
    src = hub.create_stream("n")
    ident = collect(src.map(lambda v: v))
    double = collect(src.map(lambda v: 2 * v))
    for i, v in enumerate([1, 2, 3]):
        src.emit(v, i * 10)
    assert payloads(ident) == [1, 2, 3]
    assert payloads(double) == [2, 4, 6]


def test_map_preserves_timestamp():
    hub = StreamHub()
    src = hub.create_stream("n")
    seen = collect(src.map(lambda v: v + 1))
    src.emit(1, 42)
    assert seen == [(42, 2)]


def test_map_imu_record_to_magnitude():
    # Hand computation: sqrt(3^2 + 4^2 + 12^2) = sqrt(169) = 13.
    hub = StreamHub()
    imu = hub.create_stream("imu")
    mag = collect(imu.map(lambda v: math.sqrt(v["x"] ** 2 + v["y"] ** 2 + v["z"] ** 2)))
    imu.emit({"x": 3.0, "y": 4.0, "z": 12.0}, 0)
    assert payloads(mag) == [13.0]


def test_failing_transform_drops_event_and_counts():
    hub = StreamHub()
    src = hub.create_stream("n")
    mapped = src.map(lambda v: 1 / v)
    seen = collect(mapped)
    src.emit(0, 0)
    src.emit(2, 1)
    assert payloads(seen) == [0.5]
    assert hub.dropped_total == 1
    assert hub.dropped_events[mapped.id] == 1


def test_combine_latest_gates_until_all_inputs_seen():
    hub = StreamHub()
    a, b = hub.create_stream("a"), hub.create_stream("b")
    seen = collect(hub.combine_latest([a, b]))
    a.emit("a1", 0)
    assert seen == []
    b.emit("b1", 1)
    assert payloads(seen) == [("a1", "b1")]
    a.emit("a2", 2)
    assert payloads(seen) == [("a1", "b1"), ("a2", "b1")]


def test_combine_latest_three_score_streams():
    hub = StreamHub()
    streams = [hub.create_stream(n) for n in ("s1", "s2", "s3")]
    seen = collect(hub.combine_latest(streams))
    for i, s in enumerate(streams):
        s.emit(float(i), i)
    assert payloads(seen) == [(0.0, 1.0, 2.0)]
    streams[1].emit(7.0, 10)
    assert payloads(seen)[-1] == (0.0, 7.0, 2.0)


def test_combine_latest_empty_inputs_rejected():
    hub = StreamHub()
    with pytest.raises(StreamError):
        hub.combine_latest([])


def test_emit_requires_source_stream():
    hub = StreamHub()
    src = hub.create_stream("n")
    derived = src.map(lambda v: v)
    with pytest.raises(StreamError):
        derived.emit(1, 0)


def test_no_replay_for_late_subscriber():
    hub = StreamHub()
    src = hub.create_stream("n")
    src.emit(1, 0)
    seen = collect(src)
    src.emit(2, 1)
    assert payloads(seen) == [2]


def test_subscribers_called_in_registration_order():
    hub = StreamHub()
    src = hub.create_stream("n")
    calls = []
    src.subscribe(lambda e: calls.append("s1"))
    src.subscribe(lambda e: calls.append("s2"))
    src.emit(1, 0)
    assert calls == ["s1", "s2"]


def test_cancelled_subscription_receives_nothing():
    hub = StreamHub()
    src = hub.create_stream("n")
    seen = []
    sub = src.subscribe(lambda e: seen.append(e.payload))
    src.emit(1, 0)
    sub.cancel()
    src.emit(2, 1)
    assert seen == [1]


def test_timestamp_regression_rejected():
    hub = StreamHub()
    src = hub.create_stream("n")
    src.emit(1, 10)
    with pytest.raises(TimestampError):
        src.emit(2, 9)
    src.emit(3, 10)  # equal timestamps are fine


def test_negative_timestamp_rejected():
    hub = StreamHub()
    src = hub.create_stream("n")
    with pytest.raises(TimestampError):
        src.emit(1, -1)


def test_operator_chain_introspection():
    hub = StreamHub()
    src = hub.create_stream("n")
    out = src.filter(lambda v: True).map(lambda v: v)
    assert out.operator_chain == ("filter", "map")


def test_duplicate_parent_in_combine_emits_once_per_event():
    hub = StreamHub()
    a = hub.create_stream("a")
    seen = collect(hub.combine_latest([a, a]))
    a.emit(1, 0)
    assert seen == [(0, (1, 1))]


# -- invariants ---------------------------------------------------------------


@given(st.lists(st.integers(-100, 100), max_size=40))
@settings(max_examples=60, deadline=None)
def test_per_stream_fifo_and_no_spontaneous_events(values):
    hub = StreamHub()
    src = hub.create_stream("n")
    filtered = src.filter(lambda v: v % 3 == 0)
    mapped = src.map(lambda v: -v)
    seen_f, seen_m = collect(filtered), collect(mapped)
    for i, v in enumerate(values):
        src.emit(v, i)
    assert payloads(seen_f) == [v for v in values if v % 3 == 0]  # parent order kept
    assert payloads(seen_m) == [-v for v in values]               # one out per in
    assert filtered.event_count <= src.event_count
    assert mapped.event_count == src.event_count


@given(st.lists(st.tuples(st.sampled_from(["a", "b"]), st.integers(0, 50)), max_size=30))
@settings(max_examples=60, deadline=None)
def test_combine_latest_emission_budget(events):
    hub = StreamHub()
    a, b = hub.create_stream("a"), hub.create_stream("b")
    combined = hub.combine_latest([a, b])
    clock = {"a": 0, "b": 0}
    fed = {"a": 0, "b": 0}
    for name, v in events:
        stream = a if name == "a" else b
        stream.emit(v, clock[name])
        clock[name] += 1
        fed[name] += 1
    assert combined.event_count <= fed["a"] + fed["b"]
    if fed["a"] == 0 or fed["b"] == 0:
        assert combined.event_count == 0


@given(st.lists(st.integers(0, 20), min_size=1, max_size=30))
@settings(max_examples=40, deadline=None)
def test_replay_purity(values):
    def run():
        hub = StreamHub()
        src = hub.create_stream("n")
        out = collect(src.filter(lambda v: v > 5).map(lambda v: v * v))
        for i, v in enumerate(values):
            src.emit(v, i)
        return out

    assert run() == run()

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxsched.taskgraph import (
    ContextOverlay,
    GraphNode,
    GraphStateError,
    GraphValidationError,
    NodeKind,
    TaskVariant,
    apply_overlay,
    build_graph,
    is_satisfied,
    ready_subtasks,
    remove_overlay,
)


def speech_description():
    # Mic input feeds keyword spotting, then speech-to-text, then a chatbot;
    # the early stages carry core/memory requirements.
    return {
        "task_id": "speech",
        "kind": "compound",
        "subtasks": ["mic_input", "keyword_spotting", "speech_to_text", "chatbot"],
        "edges": [
            ["mic_input", "keyword_spotting"],
            ["keyword_spotting", "speech_to_text"],
            ["speech_to_text", "chatbot"],
        ],
        "conditions": [
            {"name": "has_audio", "kind": "precondition",
             "expr": "mic.level > 0", "applies_to": ["keyword_spotting"]},
        ],
        "constraints": [
            {"name": "kw_res", "cores": 1, "memory_mb": 100,
             "applies_to": ["keyword_spotting"]},
            {"name": "stt_res", "cores": 4, "memory_mb": 400,
             "applies_to": ["speech_to_text"]},
        ],
    }


def test_build_speech_graph_topology():
    g = build_graph(speech_description())
    assert g.variant is TaskVariant.COMPOUND
    assert g.subtasks == ("mic_input", "keyword_spotting", "speech_to_text", "chatbot")
    kw_conditions = g.predecessors("keyword_spotting",
                                   (NodeKind.PRECONDITION, NodeKind.CONTEXT))
    assert [c.name for c in kw_conditions] == ["has_audio"]
    assert g.node("kw_res").cores == 1
    assert g.node("kw_res").memory_mb == 100
    assert g.stream_names() == {"mic"}


def test_single_node_elemental_graph():
    g = build_graph({"task_id": "blink"})
    assert g.variant is TaskVariant.ELEMENTAL
    assert g.subtasks == ("blink",)
    assert g.edges == ()


def test_cycle_rejected():
    with pytest.raises(GraphValidationError, match="cycle"):
        build_graph({"task_id": "t", "subtasks": ["a", "b"],
                     "edges": [["a", "b"], ["b", "a"]]})


def test_dangling_edge_rejected():
    with pytest.raises(GraphValidationError, match="missing node"):
        build_graph({"task_id": "t", "subtasks": ["a"], "edges": [["a", "ghost"]]})


def test_constraint_must_attach_to_subtask():
    with pytest.raises(GraphValidationError, match="not attached"):
        build_graph({"task_id": "t", "subtasks": ["a"],
                     "constraints": [{"name": "c", "cores": 1, "memory_mb": 10,
                                      "applies_to": []}]})


def test_constraint_bounds_validated():
    desc = {"task_id": "t", "subtasks": ["a"],
            "constraints": [{"name": "c", "cores": 0, "memory_mb": 10,
                             "applies_to": ["a"]}]}
    with pytest.raises(GraphValidationError, match="cores"):
        build_graph(desc)


# -- satisfaction --------------------------------------------------------------


def test_compound_satisfaction_is_conjunction():
    g = build_graph({"task_id": "t", "subtasks": ["a", "b"]})
    assert is_satisfied(g, {"a": True, "b": True})
    assert not is_satisfied(g, {"a": True, "b": False})


def test_missing_subtask_state_is_an_error():
    g = build_graph({"task_id": "t", "subtasks": ["a", "b"]})
    with pytest.raises(GraphStateError):
        is_satisfied(g, {"a": True})


def test_elemental_satisfaction_follows_single_state():
    g = build_graph({"task_id": "solo"})
    assert is_satisfied(g, {"solo": True})
    assert not is_satisfied(g, {"solo": False})


def test_complex_two_of_three_full_enumeration():
    # Oracle: enumerate all 8 completion states; satisfied iff >= 2 done.
    g = build_graph({"task_id": "t", "kind": "complex",
                     "subtasks": ["a", "b", "c"], "rule": "k_of(2, a, b, c)"})
    for bits in itertools.product([False, True], repeat=3):
        state = dict(zip(("a", "b", "c"), bits))
        assert is_satisfied(g, state) == (sum(bits) >= 2), state


def test_complex_rule_must_reference_known_subtasks():
    with pytest.raises(GraphValidationError, match="unknown subtasks"):
        build_graph({"task_id": "t", "kind": "complex", "subtasks": ["a"],
                     "rule": "k_of(1, a, ghost)"})


@given(st.lists(st.booleans(), min_size=2, max_size=6))
@settings(max_examples=50, deadline=None)
def test_compound_satisfaction_is_monotone(bits):
    names = [f"s{i}" for i in range(len(bits))]
    g = build_graph({"task_id": "t", "kind": "compound", "subtasks": names})
    state = dict(zip(names, bits))
    before = is_satisfied(g, state)
    for name in names:  # marking one more subtask done never flips true->false
        promoted = dict(state)
        promoted[name] = True
        if before:
            assert is_satisfied(g, promoted)


# -- readiness -----------------------------------------------------------------


def test_ready_requires_predecessors_done_and_conditions_true():
    g = build_graph(speech_description())
    none_done = {s: False for s in g.subtasks}
    # No microphone signal yet: keyword spotting is blocked twice over.
    ready = ready_subtasks(g, {"mic": {"level": 0}}, none_done)
    assert ready == {"mic_input"}
    after_mic = dict(none_done, mic_input=True)
    assert ready_subtasks(g, {"mic": {"level": 0}}, after_mic) == set()
    assert ready_subtasks(g, {"mic": {"level": 2}}, after_mic) == {"keyword_spotting"}


def test_no_conditions_all_roots_ready():
    g = build_graph({"task_id": "t", "subtasks": ["a", "b", "c"],
                     "edges": [["a", "c"], ["b", "c"]]})
    ready = ready_subtasks(g, {}, {s: False for s in g.subtasks})
    assert ready == {"a", "b"}


def test_ready_excludes_done_subtasks():
    g = build_graph({"task_id": "t", "subtasks": ["a", "b"], "edges": [["a", "b"]]})
    assert ready_subtasks(g, {}, {"a": True, "b": False}) == {"b"}
    assert ready_subtasks(g, {}, {"a": True, "b": True}) == set()


def test_unreferenced_stream_is_an_error():
    g = build_graph(speech_description())
    with pytest.raises(GraphStateError, match="mic"):
        ready_subtasks(g, {}, {s: False for s in g.subtasks})


def test_ready_subset_of_predecessor_complete():
    g = build_graph(speech_description())
    state = {s: False for s in g.subtasks}
    ready = ready_subtasks(g, {"mic": {"level": 5}}, state)
    for name in ready:
        preds = g.predecessors(name, (NodeKind.SUBTASK,))
        assert all(state[p.name] for p in preds)


# -- overlays ------------------------------------------------------------------


def movement_overlay():
    return ContextOverlay(
        task_id="speech",
        nodes=(GraphNode("robot_still", NodeKind.CONTEXT, expr="imu.mag <= 0.5"),),
        edges=(("robot_still", "keyword_spotting"),),
        weight_override=0.0,
    )


def test_overlay_gates_subtask_while_moving():
    g = apply_overlay(build_graph(speech_description()), movement_overlay())
    after_mic = {s: s == "mic_input" for s in g.subtasks}
    moving = {"mic": {"level": 2}, "imu": {"mag": 3.0}}
    still = {"mic": {"level": 2}, "imu": {"mag": 0.0}}
    assert ready_subtasks(g, moving, after_mic) == set()
    assert ready_subtasks(g, still, after_mic) == {"keyword_spotting"}


def test_overlay_roundtrip_restores_graph_exactly():
    g = build_graph(speech_description())
    overlay = movement_overlay()
    assert remove_overlay(apply_overlay(g, overlay), overlay) == g


def test_empty_overlay_is_identity():
    g = build_graph(speech_description())
    assert apply_overlay(g, ContextOverlay(task_id="speech")) == g


def test_overlay_target_mismatch():
    g = build_graph(speech_description())
    with pytest.raises(GraphValidationError, match="targets"):
        apply_overlay(g, ContextOverlay(task_id="other"))


def test_overlay_keeps_graph_acyclic():
    g = build_graph({"task_id": "t", "subtasks": ["a"]})
    bad = ContextOverlay(task_id="t",
                         nodes=(GraphNode("c", NodeKind.CONTEXT, expr="x > 0"),),
                         edges=(("c", "c"),))
    with pytest.raises(GraphValidationError):
        apply_overlay(g, bad)

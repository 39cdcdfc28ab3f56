"""The bundled rebalance-and-remove story, checked state by state."""

from cfset.checker import CheckSuite, check_state, check_step, is_confluent, is_tree_like
from cfset.core import SYS, compute_set
from cfset.explorer import replay_script, serialize_labels
from cfset.scenario import build_script, bundled_script

FULL_KEYS = (10, 13, 14, 15, 16, 17, 18, 22)


def test_setup_reaches_the_documented_shape(story):
    trace, marks, addr = story
    s = trace.state(marks["setup_done"])
    assert compute_set(s) == {10, 14, 15, 17, 18, 22}
    assert s.left(addr["n14"]) == addr["n13"] and s.right(addr["n14"]) == addr["n18"]
    assert s.left(addr["n18"]) == addr["n15"] and s.right(addr["n15"]) == addr["n17"]
    assert s.deleted(addr["n13"])
    # The first insert's node has no left descendant but four right ones.
    assert s.left(addr["n10"]) == 1  # bottom
    rights = set()
    stack = [s.right(addr["n10"])]
    while stack:
        a = stack.pop()
        if a == 1:
            continue
        rights.add(a)
        stack.extend((s.left(a), s.right(a)))
    assert len(rights) >= 4


def test_clone_link_assertions(story):
    trace, marks, addr = story
    s = trace.state(marks["clone_linked"])
    assert is_confluent(s, addr["n13"])
    assert not is_tree_like(s, addr["n14"])
    assert all(
        is_tree_like(s, a) for a in s.reachable() if a != addr["n14"]
    )


def test_target_unlinked_after_edge_swing(story):
    trace, marks, addr = story
    s = trace.state(marks["edge_swung"])
    assert not s.path_connected(addr["n14"])
    assert not s.removed(addr["n14"])  # flag comes one step later


def test_maintenance_steps_preserve_the_set(story):
    trace, _, _ = story
    for i, label in enumerate(trace.labels):
        if label.pid == SYS:
            assert compute_set(trace.state(i)) == compute_set(trace.state(i + 1))


def test_final_dendrites_anchor_at_the_pivot(story):
    trace, marks, addr = story
    s = trace.state(marks["dendrites_anchored"])
    removed = [a for a, n in s.nodes.items() if n.removed]
    assert sorted(removed) == sorted(
        [addr["n14"], addr["n15"], addr["n17"], addr["clone14"]]
    )
    for a in removed:
        seen = set()
        while s.removed(a):
            assert a not in seen
            seen.add(a)
            assert s.left(a) == s.right(a)  # focused forever
            a = s.left(a)
        assert a == addr["n18"]
    assert s.path_connected(addr["n18"])
    assert compute_set(s) == {10, 18, 22}


def test_full_suite_green_across_the_story(story):
    trace, _, _ = story
    suite = CheckSuite(FULL_KEYS, "corrected")
    bad = list(check_state(trace.initial, suite))
    for i, label in enumerate(trace.labels):
        bad += check_step(trace.state(i), label, trace.state(i + 1), suite)
        bad += check_state(trace.state(i + 1), suite)
    assert bad == []


def test_bundled_script_matches_builder():
    assert bundled_script().splitlines()[1:] == build_script().splitlines()


def test_script_round_trip(story):
    trace, _, _ = story
    text = serialize_labels(trace.labels, 2)
    again, violations = replay_script(text, 2, CheckSuite(FULL_KEYS, "corrected"))
    assert violations == []
    assert len(again) == len(trace)
    assert compute_set(again.state(len(again))) == compute_set(trace.state(len(trace)))

"""Exploration: canonicalization, exhaustiveness against an independent
enumerator, replay errors, and the two readings of floating connectivity."""

import pytest

from cfset.checker import CheckSuite
from cfset.core import BOT, M0, ROOT, Node, fin, initial_state
from cfset.explorer import (
    ExploreConfig,
    canonical_digest,
    digest_hex,
    explore,
    replay,
    replay_script,
)
from cfset.semantics import StepLabel, StepNotEnabled, apply_step, enabled_steps


def _enumerate_reachable(config):
    """Independent depth-first enumerator used as the exhaustiveness
    oracle; tracks the same budgets but shares no code with the search."""
    seen = set()

    def budget_labels(state, ops_left, sys_left):
        for label in enabled_steps(state, config.keys):
            if label.instr == M0:
                if label.pid == 0:
                    if sys_left == 0:
                        continue
                elif ops_left[label.pid - 1] == 0:
                    continue
            yield label

    def walk(state, ops_left, sys_left, depth):
        key = (canonical_digest(state), ops_left, sys_left)
        if key in seen:
            return
        seen.add(key)
        if depth == config.depth_limit:
            return
        for label in budget_labels(state, ops_left, sys_left):
            ops2 = list(ops_left)
            sys2 = sys_left
            if label.instr == M0:
                if label.pid == 0:
                    sys2 -= 1
                else:
                    ops2[label.pid - 1] -= 1
            walk(apply_step(state, label, check=False), tuple(ops2), sys2, depth + 1)

    walk(
        initial_state(config.num_workers),
        (config.ops_per_worker,) * config.num_workers,
        config.sys_budget,
        0,
    )
    return seen


def test_micro_exploration_matches_dfs_oracle(micro_report):
    cfg, report = micro_report
    oracle = _enumerate_reachable(cfg)
    assert report.states_visited == len(oracle) == 10
    assert report.violations == []


def test_small_two_key_exploration_matches_oracle():
    cfg = ExploreConfig(
        num_workers=1, keys=(1, 2), ops_per_worker=2, sys_budget=1, depth_limit=10
    )
    report = explore(cfg)
    assert report.states_visited == len(_enumerate_reachable(cfg))
    assert report.violations == []


def test_depth_zero_visits_only_the_initial_state():
    cfg = ExploreConfig(num_workers=2, keys=(1,), depth_limit=0)
    report = explore(cfg)
    assert report.states_visited == 1
    assert report.transitions == 0
    assert report.violations == []


def test_digest_ignores_address_identity():
    base = initial_state(1)
    nodes_a = dict(base.nodes)
    nodes_a[2] = Node(fin(4), 3, BOT, False, False)
    nodes_a[3] = Node(fin(2), BOT, BOT, False, False)
    nodes_a[ROOT] = nodes_a[ROOT]._replace(left=2)
    a = base.replaced(nodes=nodes_a, next_addr=4)

    nodes_b = dict(base.nodes)  # same shape, the two addresses swapped
    nodes_b[3] = Node(fin(4), 2, BOT, False, False)
    nodes_b[2] = Node(fin(2), BOT, BOT, False, False)
    nodes_b[ROOT] = nodes_b[ROOT]._replace(left=3)
    b = base.replaced(nodes=nodes_b, next_addr=4)

    assert canonical_digest(a) == canonical_digest(b)
    assert digest_hex(a) == digest_hex(b)


def test_digest_distinguishes_shapes():
    one_then_two = [
        StepLabel(1, "M0", "InvokeInsert", (1,)),
        StepLabel(1, "I1", "Loop"),
        StepLabel(1, "I1", "ToI3"),
        StepLabel(1, "I3", "InsertLeft"),
        StepLabel(1, "M0", "InvokeInsert", (2,)),
        StepLabel(1, "I1", "Loop"),
        StepLabel(1, "I1", "Loop"),
        StepLabel(1, "I1", "ToI3"),
        StepLabel(1, "I3", "InsertRight"),
    ]
    two_then_one = [
        StepLabel(1, "M0", "InvokeInsert", (2,)),
        StepLabel(1, "I1", "Loop"),
        StepLabel(1, "I1", "ToI3"),
        StepLabel(1, "I3", "InsertLeft"),
        StepLabel(1, "M0", "InvokeInsert", (1,)),
        StepLabel(1, "I1", "Loop"),
        StepLabel(1, "I1", "Loop"),
        StepLabel(1, "I1", "ToI3"),
        StepLabel(1, "I3", "InsertLeft"),
    ]
    a, _ = replay(one_then_two, 1)
    b, _ = replay(two_then_one, 1)
    assert canonical_digest(a.state(len(a))) != canonical_digest(b.state(len(b)))


def test_truncation_guard():
    cfg = ExploreConfig(num_workers=2, keys=(1, 2, 3), depth_limit=12, max_states=50)
    report = explore(cfg)
    assert report.frontier_truncated


def test_replay_reports_failing_condition():
    labels = [
        StepLabel(1, "M0", "InvokeInsert", (1,)),
        StepLabel(1, "I1", "ToI3"),  # wrong: the first continuation loops
    ]
    with pytest.raises(StepNotEnabled, match="step 1"):
        replay(labels, 1)


FOOTNOTE_SCRIPT = """
# float the key-2 node mid-removal, then retire the bottom sentinel from
# the 3-search path by inserting 3 under the surviving child
1 M0 InvokeDelete 2
2 M0 InvokeInsert 2
2 I1 Loop
2 I1 ToI3
2 I3 InsertLeft
1 D1 Loop
1 D1 ToD2
1 D2 Delete
1 M0 InvokeInsert 1
1 I1 Loop
1 I1 Loop
1 I1 ToI3
1 I3 InsertLeft
0 M0 InvokeRemove root true
0 V6 V6
2 M0 InvokeInsert 3
2 I1 Loop
2 I1 Loop
2 I1 ToI3
2 I3 InsertRight
"""


def test_footnote_variant_separates_on_directed_script():
    _, with_original = replay_script(FOOTNOTE_SCRIPT, 2, CheckSuite((1, 2, 3), "original"))
    _, with_corrected = replay_script(FOOTNOTE_SCRIPT, 2, CheckSuite((1, 2, 3), "corrected"))
    assert any(v.rule == "floating-potential-stable" for v in with_original)
    assert with_corrected == []


def test_zero_length_walk_is_just_the_initial_state():
    from cfset.explorer import random_walk

    cfg = ExploreConfig(num_workers=2, keys=(1,), walks=2, walk_length=0)
    traces, violations = random_walk(cfg)
    assert violations == []
    assert all(len(t) == 0 for t in traces)


def test_walk_budgets_respected(walk_corpus):
    cfg, traces, violations = walk_corpus
    assert violations == []
    for t in traces:
        invocations = [l for l in t.labels if l.instr == M0]
        assert sum(1 for l in invocations if l.pid == 1) <= cfg.ops_per_worker
        assert sum(1 for l in invocations if l.pid == 2) <= cfg.ops_per_worker
        assert sum(1 for l in invocations if l.pid == 0) <= cfg.sys_budget

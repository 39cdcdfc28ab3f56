"""Operation carving, abstract scans, witness search, assignment, and the
factorial oracle, cross-validated on scripted and random schedules."""

import pytest

from cfset.core import BOT, ROOT, initial_state
from cfset.explorer import Trace, replay
from cfset.linearize import (
    OperationExecution,
    ScanSequence,
    ScanTriple,
    assign_linearizations,
    brute_force_linearizable,
    carve_operations,
    check_connectivity_monotone,
    check_deletion_frozen_offpath,
    extract_kscan,
    find_linearization,
    replay_by_linearization,
    scanning_witness,
    validate_kscan,
)
from cfset.scenario import find_key, run_sys, run_worker
from cfset.semantics import CONTAINS, DELETE, INSERT, REMOVE, StepLabel, worker_continuation


def test_carve_single_insert():
    labels = [
        StepLabel(1, "M0", "InvokeInsert", (5,)),
        StepLabel(1, "I1", "Loop"),
        StepLabel(1, "I1", "ToI3"),
        StepLabel(1, "I3", "InsertLeft"),
    ]
    trace, _ = replay(labels, 1)
    (e,) = carve_operations(trace)
    assert e == OperationExecution(1, INSERT, 5, 0, 3, True)


def test_carve_pending_operation():
    labels = [
        StepLabel(1, "M0", "InvokeDelete", (5,)),
        StepLabel(1, "D1", "Loop"),
    ]
    trace, _ = replay(labels, 1)
    (e,) = carve_operations(trace)
    assert not e.complete and e.response_index is None


def test_contains_on_empty_scan_shape():
    labels = [
        StepLabel(1, "M0", "InvokeContains", (5,)),
        StepLabel(1, "C1", "Loop"),
        StepLabel(1, "C1", "ReturnFalse"),
    ]
    trace, _ = replay(labels, 1)
    (e,) = carve_operations(trace)
    scan = extract_kscan(trace, e)
    assert [t.kind for t in scan.triples] == ["Delaying", "KSearch"]
    assert scan.triples[0].x == ROOT and scan.triples[-1].y == BOT
    assert validate_kscan(trace, scan)
    assert scanning_witness(trace, scan) is not None


def test_scan_rejects_shuffled_indices(demo):
    trace, _, _ = demo
    e = next(x for x in carve_operations(trace) if x.kind == CONTAINS or x.complete)
    scan = extract_kscan(trace, e)
    backwards = ScanSequence(scan.pid, scan.key, tuple(reversed(scan.triples)))
    if len(scan.triples) > 1:
        assert not validate_kscan(trace, backwards)


def test_scan_rejects_bottom_node(demo):
    trace, _, _ = demo
    e = carve_operations(trace)[0]
    scan = extract_kscan(trace, e)
    poisoned = ScanSequence(
        scan.pid, scan.key, (ScanTriple(scan.triples[0].index, BOT, BOT, "Delaying"),)
    )
    assert not validate_kscan(trace, poisoned)


def test_demo_scans_validate_with_backtracking(demo):
    trace, marks, addr = demo
    execs = carve_operations(trace)
    assert all(e.complete for e in execs)
    kinds_seen = set()
    for e in execs:
        scan = extract_kscan(trace, e)
        assert validate_kscan(trace, scan), e
        assert scanning_witness(trace, scan) is not None, e
        kinds_seen |= {t.kind for t in scan.triples}
    assert kinds_seen == {"Delaying", "KSearch", "Backtracking"}


def test_dormant_insert_skips_the_section_hop(demo):
    trace, marks, _ = demo
    e = next(
        x
        for x in carve_operations(trace)
        if x.kind == INSERT and x.key == 16 and x.complete
    )
    hops = [
        l
        for l in trace.labels[e.invoke_index : e.response_index]
        if l.pid == e.pid and l.instr == "I1" and l.branch == "ToI3"
    ]
    assert hops, "the demo parks the insert right before the section hop"
    scan = extract_kscan(trace, e)
    steps_by_p = [
        l
        for l in trace.labels[e.invoke_index : e.response_index]
        if l.pid == e.pid
    ]
    assert len(scan.triples) == len(steps_by_p) - len(hops)
    assert validate_kscan(trace, scan)


def _dormant_contains_story():
    """A reporting operation whose answer is only justified by an earlier
    state: it parks at the key-14 node, survives the whole rotation and
    removal story, and still returns true although the key is long gone."""
    trace = Trace(initial_state(3))
    for pid, key in ((1, 10), (2, 22), (1, 14), (2, 18), (1, 13)):
        run_worker(trace, pid, INSERT, key)
    run_worker(trace, 2, DELETE, 13)
    run_worker(trace, 1, INSERT, 15)
    run_worker(trace, 2, INSERT, 17)
    s = trace.state(len(trace))
    n22, n18, n14 = find_key(s, 22), find_key(s, 18), find_key(s, 14)

    trace.extend(StepLabel(3, "M0", "InvokeContains", (14,)))
    while True:  # park at the value check on the key-14 node
        s = trace.state(len(trace))
        if s.workers[3].ctrl == "C2":
            break
        trace.extend(worker_continuation(s, 3))

    from cfset.semantics import ROTATE_LEFT

    run_sys(trace, ROTATE_LEFT, n22, True)
    run_worker(trace, 1, DELETE, 15)
    run_worker(trace, 2, DELETE, 17)
    clone = find_key(trace.state(len(trace)), 14)
    run_sys(trace, REMOVE, clone, False)
    run_worker(trace, 1, DELETE, 14)
    run_sys(trace, REMOVE, clone, False)
    run_sys(trace, REMOVE, n18, True)

    trace.extend(worker_continuation(trace.state(len(trace)), 3))  # the return
    return trace


def test_non_local_linearization_point():
    trace = _dormant_contains_story()
    e = next(x for x in carve_operations(trace) if x.kind == CONTAINS)
    assert e.return_val is True
    final = trace.state(len(trace))
    assert 14 not in final.compute_set()  # stale truth, still linearizable
    result = assign_linearizations(trace)
    assert result.ok
    a = next(x for x in result.assignments if x.op == e)
    assert a.tag == "Ret1"
    assert 14 in trace.state(a.lin_index).compute_set()
    assert a.lin_index < e.response_index  # strictly before the return read
    assert replay_by_linearization(trace, result) == []


def test_assignments_and_replay_on_demo(demo):
    trace, _, _ = demo
    result = assign_linearizations(trace)
    assert result.ok
    assert replay_by_linearization(trace, result) == []
    for a in result.assignments:
        assert a.op.invoke_index <= a.lin_index <= a.op.response_index + 1


def test_brute_force_examples():
    seq = [
        OperationExecution(1, INSERT, 5, 0, 1, True),
        OperationExecution(1, CONTAINS, 5, 2, 3, True),
    ]
    assert brute_force_linearizable(seq)
    alone = [OperationExecution(1, CONTAINS, 5, 0, 1, True)]
    assert not brute_force_linearizable(alone)  # nothing ever inserted 5
    overlap = [
        OperationExecution(1, INSERT, 5, 0, 3, True),
        OperationExecution(2, CONTAINS, 5, 1, 2, True),  # may land after the insert
    ]
    assert brute_force_linearizable(overlap)


def test_brute_force_caps_at_eight():
    ops = [
        OperationExecution(1, INSERT, k, 2 * k, 2 * k + 1, True) for k in range(9)
    ]
    with pytest.raises(ValueError):
        brute_force_linearizable(ops)
    assert find_linearization(ops) is not None  # the unbounded search copes


def test_oracle_agrees_with_assignment_on_walks(walk_corpus):
    _, traces, _ = walk_corpus
    agreed = 0
    for t in traces:
        execs = carve_operations(t)
        if not all(e.complete for e in execs) or len(execs) > 8:
            continue
        result = assign_linearizations(t)
        assert result.ok, result.failures
        assert brute_force_linearizable(execs)
        assert replay_by_linearization(t, result) == []
        agreed += 1
    assert agreed >= 25


def test_history_guarantees_hold_on_demo(demo):
    trace, _, _ = demo
    assert check_connectivity_monotone(trace, (13, 14, 15, 16, 17)) == []
    assert check_deletion_frozen_offpath(trace, (13, 14, 15, 16, 17)) == []

"""A scripted end-to-end story used by the replay tests and the bundled
demo script: an unbalanced tree is built, rebalanced with one left
rotation, and then stripped of three logically deleted nodes, leaving a
chain of removed nodes anchored at a single live interior node.

The builders return full traces plus named checkpoints (state indices) and
an address map, so tests can make exact structural assertions at each
moment of the story.
"""

from __future__ import annotations

from importlib import resources

from .core import BOT, M0, State, fin, initial_state
from .explorer import Trace, serialize_labels
from .semantics import (
    DELETE,
    INSERT,
    REMOVE,
    ROTATE_LEFT,
    WORKER_INVOKE_BRANCHES,
    StepLabel,
    sys_continuation,
    sys_invocation_label,
    worker_continuation,
)

SCRIPT_NAME = "rebalance_removal.script"


def find_key(state: State, key: int) -> int:
    """The reachable, unremoved node carrying ``key``; unique in any
    well-formed idle state."""
    hits = [
        a
        for a in state.reachable()
        if state.key_of(a) == fin(key) and not state.removed(a)
    ]
    if len(hits) != 1:
        raise LookupError(f"key {key} resolves to {hits}")
    return hits[0]


def run_worker(trace: Trace, pid: int, kind: str, key: int) -> None:
    trace.extend(StepLabel(pid, M0, WORKER_INVOKE_BRANCHES[kind], (key,)))
    _drive_worker(trace, pid, lambda w, s: w.ctrl == M0)


def _drive_worker(trace: Trace, pid: int, done) -> None:
    while True:
        state = trace.state(len(trace))
        w = state.workers[pid]
        if done(w, state):
            return
        label = worker_continuation(state, pid)
        if label is None:
            raise RuntimeError(f"worker {pid} blocked at {w.ctrl}")
        trace.extend(label)


def run_sys(trace: Trace, kind: str, parent: int, left_side: bool) -> None:
    trace.extend(sys_invocation_label(kind, parent, left_side))
    while trace.state(len(trace)).sysregs.ctrl != M0:
        trace.extend(sys_continuation(trace.state(len(trace))))


def build_story() -> tuple[Trace, dict, dict]:
    """The full rebalance-and-remove story.

    Returns (trace, checkpoints, addresses); checkpoints maps phase names
    to state indices and addresses maps descriptive node names to their
    address ids.
    """
    trace = Trace(initial_state(2))
    marks: dict[str, int] = {}
    addr: dict[str, int] = {}

    def here(name: str) -> None:
        marks[name] = len(trace)

    # An unbalanced tree: 10 gets four right-descendants, then 13 is
    # logically deleted and 15, 17 are added below 18.
    for pid, key in ((1, 10), (2, 22), (1, 14), (2, 18), (1, 13)):
        run_worker(trace, pid, INSERT, key)
    run_worker(trace, 2, DELETE, 13)
    run_worker(trace, 1, INSERT, 15)
    run_worker(trace, 2, INSERT, 17)
    here("setup_done")
    state = trace.state(len(trace))
    for name, key in (("n10", 10), ("n22", 22), ("n14", 14), ("n18", 18),
                      ("n13", 13), ("n15", 15), ("n17", 17)):
        addr[name] = find_key(state, key)

    # Rotate 14 left below 22: a clone of 14 appears under 18, the original
    # is unlinked and flagged removed.
    trace.extend(sys_invocation_label(ROTATE_LEFT, addr["n22"], True))
    addr["clone14"] = trace.state(len(trace)).next_addr
    trace.extend(sys_continuation(trace.state(len(trace))))  # clone + link
    here("clone_linked")
    trace.extend(sys_continuation(trace.state(len(trace))))  # re-point target
    trace.extend(sys_continuation(trace.state(len(trace))))  # swing parent edge
    here("edge_swung")
    trace.extend(sys_continuation(trace.state(len(trace))))  # flag removed
    here("rotation_done")

    # Logically delete 15 and 17, then physically remove 15, the clone's
    # right child.
    run_worker(trace, 1, DELETE, 15)
    run_worker(trace, 2, DELETE, 17)
    run_sys(trace, REMOVE, addr["clone14"], False)
    here("first_removal_done")

    # Delete the clone itself, remove 17 (now the clone's right child),
    # then remove the clone; every removed node ends up anchored at 18.
    run_worker(trace, 1, DELETE, 14)
    trace.extend(sys_invocation_label(REMOVE, addr["clone14"], False))
    trace.extend(sys_continuation(trace.state(len(trace))))
    here("mid_final_removal")
    while trace.state(len(trace)).sysregs.ctrl != M0:
        trace.extend(sys_continuation(trace.state(len(trace))))
    run_sys(trace, REMOVE, addr["n18"], True)
    here("dendrites_anchored")
    return trace, marks, addr


def build_script() -> str:
    trace, _, _ = build_story()
    return serialize_labels(trace.labels, num_workers=2)


def bundled_script() -> str:
    return resources.files("cfset.data").joinpath(SCRIPT_NAME).read_text()


def build_traversal_demo() -> tuple[Trace, dict, dict]:
    """The story extended with two dormant traversals.

    Worker 1 parks an insert of 16 at the deleted node 17 just before 17 is
    physically removed; worker 2 parks an insert of 17 one edge higher.
    After both removals finish, worker 1 retries through the removed
    region and lands the new node under 13, and worker 2 wakes inside the
    removed node, backtracks through it, and chases worker 1's fresh node
    before inserting next to it.
    """
    trace = Trace(initial_state(2))
    marks: dict[str, int] = {}
    addr: dict[str, int] = {}

    for pid, key in ((1, 10), (2, 22), (1, 14), (2, 18), (1, 13)):
        run_worker(trace, pid, INSERT, key)
    run_worker(trace, 2, DELETE, 13)
    run_worker(trace, 1, INSERT, 15)
    run_worker(trace, 2, INSERT, 17)
    state = trace.state(len(trace))
    addr["n18"] = find_key(state, 18)
    addr["n17"] = find_key(state, 17)
    addr["n13"] = find_key(state, 13)
    run_sys(trace, ROTATE_LEFT, find_key(state, 22), True)
    addr["clone14"] = find_key(trace.state(len(trace)), 14)
    run_worker(trace, 1, DELETE, 15)
    run_worker(trace, 2, DELETE, 17)
    run_sys(trace, REMOVE, addr["clone14"], False)  # removes 15
    run_worker(trace, 1, DELETE, 14)

    # Park worker 1 heading for the gap left of 17, and worker 2 one
    # handshake before stepping onto 17.
    trace.extend(StepLabel(1, M0, WORKER_INVOKE_BRANCHES[INSERT], (16,)))
    _drive_worker(trace, 1, lambda w, s: w.ctrl == "I1" and w.nxt == BOT)
    marks["parked_16"] = len(trace)
    trace.extend(StepLabel(2, M0, WORKER_INVOKE_BRANCHES[INSERT], (17,)))
    _drive_worker(trace, 2, lambda w, s: w.ctrl == "I1" and w.nxt == addr["n17"])
    marks["parked_17"] = len(trace)

    run_sys(trace, REMOVE, addr["clone14"], False)  # removes 17
    run_sys(trace, REMOVE, addr["n18"], True)  # removes the clone
    marks["removals_done"] = len(trace)

    _drive_worker(trace, 1, lambda w, s: w.ctrl == M0)
    marks["insert16_done"] = len(trace)
    _drive_worker(trace, 2, lambda w, s: w.ctrl == M0)
    marks["insert17_done"] = len(trace)
    return trace, marks, addr

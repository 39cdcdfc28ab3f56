"""A genuinely concurrent, lock-per-node implementation of the set.

Workers run the three data operations with their backtracking behaviour
intact; a single maintenance thread performs rotations (under a pluggable
balance policy) and physical removals, taking exactly the locks the
model's prerequisites list and applying the structural writes in the same
order as the verified transition system.  Every operation appends
invoke/respond events to a totally ordered history log for offline
linearizability checking.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

from .linearize import OperationExecution, _sequential_apply, find_linearization
from .semantics import CONTAINS, DELETE, INSERT

INF = float("inf")


class RtNode:
    __slots__ = ("key", "left", "right", "deleted", "removed", "lock", "frozen")

    def __init__(self, key, deleted=False, left=None, right=None):
        self.key = key
        self.left = left
        self.right = right
        self.deleted = deleted
        self.removed = False
        self.lock = threading.Lock()
        self.frozen = None  # (left, right) snapshot taken when removed

    def child(self, go_left: bool):
        return self.left if go_left else self.right

    def set_child(self, go_left: bool, node) -> None:
        if go_left:
            self.left = node
        else:
            self.right = node


class HistoryEvent(NamedTuple):
    seq: int
    tid: int
    phase: str  # "Invoke" | "Respond"
    kind: str
    key: int
    result: Optional[bool]


class HistoryLog:
    """Append-only event log; a single counter under a lock gives every
    event a global total order."""

    def __init__(self):
        self._lock = threading.Lock()
        self.events: list[HistoryEvent] = []

    def append(self, tid, phase, kind, key, result=None) -> int:
        with self._lock:
            seq = len(self.events)
            self.events.append(HistoryEvent(seq, tid, phase, kind, key, result))
            return seq

    def dump(self) -> str:
        lines = []
        for e in self.events:
            tail = "" if e.result is None else f" {int(e.result)}"
            lines.append(f"{e.seq} {e.tid} {e.phase} {e.kind} {e.key}{tail}")
        return "\n".join(lines) + "\n"


class ConcurrentSetHandle:
    """Shared tree with one mutual-exclusion lock per node.

    The root is a sentinel with the top key, so every search immediately
    goes left; an absent child is ``None``.
    """

    def __init__(self, log: Optional[HistoryLog] = None):
        self.root = RtNode(INF)
        self.log = log or HistoryLog()
        self.all_nodes: list[RtNode] = [self.root]  # append-only registry
        self.backtracks = 0  # wake-ups inside removed nodes (under that lock)
        self.retries = 0  # insertion slots stolen between look-up and lock

    # -- data operations (history-logging wrappers at the bottom) -----

    def _locate(self, k):
        """Shared search loop: returns ('missing', last) when the search
        fell off the tree at ``last``, or ('found', node) on a key match."""
        nd = nxt = self.root
        while True:
            if nxt is None:
                return "missing", nd
            nd = nxt
            if k == nd.key:
                return "found", nd
            nxt = nd.child(k < nd.key)

    def _contains(self, k) -> bool:
        nd = nxt = self.root
        while True:
            if nxt is None:
                return False
            nd = nxt
            if k == nd.key:
                return not nd.deleted
            nxt = nd.child(k < nd.key)

    def _delete(self, k) -> bool:
        nd = nxt = self.root
        while True:
            if nxt is None:
                return False
            nd = nxt
            if k == nd.key:
                with nd.lock:
                    if nd.deleted:
                        return False
                    if nd.removed:
                        self.backtracks += 1
                        nxt = nd.right  # backtrack through the removed node
                        continue
                    nd.deleted = True
                    return True
            nxt = nd.child(k < nd.key)

    def _insert(self, k) -> bool:
        nd = nxt = self.root
        while True:
            if nxt is None:
                with nd.lock:
                    slot = nd.child(k < nd.key)
                    if slot is not None:
                        self.retries += 1
                        nxt = slot  # someone claimed the slot: retry from it
                        continue
                    fresh = RtNode(k)
                    self.all_nodes.append(fresh)
                    nd.set_child(k < nd.key, fresh)
                    return True
            nd = nxt
            if k == nd.key:
                with nd.lock:
                    if not nd.deleted:
                        return False
                    if nd.removed:
                        self.backtracks += 1
                        nxt = nd.right
                        continue
                    nd.deleted = False
                    return True
            nxt = nd.child(k < nd.key)


def set_contains(h: ConcurrentSetHandle, k: int, tid: int = 1) -> bool:
    h.log.append(tid, "Invoke", CONTAINS, k)
    r = h._contains(k)
    h.log.append(tid, "Respond", CONTAINS, k, r)
    return r


def set_delete(h: ConcurrentSetHandle, k: int, tid: int = 1) -> bool:
    h.log.append(tid, "Invoke", DELETE, k)
    r = h._delete(k)
    h.log.append(tid, "Respond", DELETE, k, r)
    return r


def set_insert(h: ConcurrentSetHandle, k: int, tid: int = 1) -> bool:
    h.log.append(tid, "Invoke", INSERT, k)
    r = h._insert(k)
    h.log.append(tid, "Respond", INSERT, k, r)
    return r


# ---------------------------------------------------------------------------
# Maintenance
# ---------------------------------------------------------------------------


def imbalance_policy(threshold: int = 2) -> Callable:
    """Default balance policy: rotate toward the shorter side when the
    subtree height difference reaches the threshold."""

    def decide(heights, node):
        lh = heights.get(id(node.left), 0)
        rh = heights.get(id(node.right), 0)
        if rh - lh >= threshold:
            return "left"
        if lh - rh >= threshold:
            return "right"
        return None

    return decide


def _snapshot(root: RtNode):
    """(parent, went_left, node) triples plus a height map, from one
    unlocked traversal.  Heights are advisory; only lock-verified fields
    gate mutations."""
    out = []
    heights = {}

    def walk(node):
        if node is None:
            return 0
        for side, c in ((True, node.left), (False, node.right)):
            if c is not None:
                out.append((node, side, c))
        h = 1 + max(walk(node.left), walk(node.right))
        heights[id(node)] = h
        return h

    walk(root)
    return out, heights


def _try_locks(nodes) -> bool:
    got = []
    for n in nodes:
        if n.lock.acquire(blocking=False):
            got.append(n)
        else:
            for g in got:
                g.lock.release()
            return False
    return True


def _unlock(nodes) -> None:
    for n in nodes:
        n.lock.release()


def _remove_candidate(parent: RtNode, went_left: bool, node: RtNode) -> bool:
    if not _try_locks([parent, node]):
        return False
    try:
        if (
            parent.removed
            or node.removed
            or parent.child(went_left) is not node
            or not node.deleted
            or (node.left is not None and node.right is not None)
        ):
            return False
        child = node.left if node.left is not None else node.right
        parent.set_child(went_left, child)
        if node.left is None:
            node.left = parent
        else:
            node.right = parent
        if node.left is parent:
            node.right = parent
        else:
            node.left = parent
        node.frozen = (node.left, node.right)
        node.removed = True
        return True
    finally:
        _unlock([parent, node])


def _rotate_candidate(
    h: ConcurrentSetHandle, parent: RtNode, went_left: bool, node: RtNode, direction: str
) -> bool:
    pivot = node.right if direction == "left" else node.left
    if pivot is None:
        return False
    if not _try_locks([parent, node, pivot]):
        return False
    clone_locked = None
    try:
        fresh = (
            not parent.removed
            and not node.removed
            and not pivot.removed
            and parent.child(went_left) is node
            and (node.right if direction == "left" else node.left) is pivot
        )
        if not fresh:
            return False
        clone = RtNode(node.key, node.deleted)
        h.all_nodes.append(clone)
        clone.lock.acquire()  # fields frozen until the rotation completes
        clone_locked = clone
        if direction == "left":
            clone.left, clone.right = node.left, pivot.left
            pivot.left = clone
            node.left = pivot
        else:
            clone.left, clone.right = pivot.right, node.right
            pivot.right = clone
            node.right = pivot
        parent.set_child(went_left, pivot)
        node.frozen = (node.left, node.right)
        node.removed = True
        return True
    finally:
        if clone_locked is not None:
            clone_locked.lock.release()
        _unlock([parent, node, pivot])


def maintenance_pass(h: ConcurrentSetHandle, policy: Optional[Callable] = None) -> int:
    """One scan over the tree: remove deleted nodes that have a missing
    child, rotate where the policy asks.  Contended locks skip the
    candidate; the count of performed structural operations is returned."""
    policy = policy or imbalance_policy()
    edges, heights = _snapshot(h.root)
    done = 0
    for parent, went_left, node in edges:
        if node.removed or parent.removed:
            continue
        if node.deleted and (node.left is None or node.right is None):
            if _remove_candidate(parent, went_left, node):
                done += 1
                continue
        direction = policy(heights, node)
        if direction is not None and _rotate_candidate(h, parent, went_left, node, direction):
            done += 1
    return done


# ---------------------------------------------------------------------------
# Stress harness
# ---------------------------------------------------------------------------


@dataclass
class StressConfig:
    threads: int = 4
    ops_per_thread: int = 200
    keys: int = 8
    maintenance: bool = True
    seed: int = 7
    window: int = 8


@dataclass
class StressOutcome:
    passed: bool
    log: HistoryLog
    problems: list = field(default_factory=list)
    final_set: frozenset = frozenset()
    ops: int = 0
    backtracks: int = 0
    retries: int = 0


def _history_executions(log: HistoryLog) -> list[OperationExecution]:
    open_ops: dict[int, HistoryEvent] = {}
    out = []
    for e in log.events:
        if e.phase == "Invoke":
            if e.tid in open_ops:
                raise ValueError(f"thread {e.tid} broke invoke/respond alternation")
            open_ops[e.tid] = e
        else:
            inv = open_ops.pop(e.tid, None)
            if inv is None or inv.kind != e.kind or inv.key != e.key:
                raise ValueError(f"respond without matching invoke by {e.tid}")
            out.append(
                OperationExecution(e.tid, e.kind, e.key, inv.seq, e.seq, e.result)
            )
    if open_ops:
        raise ValueError("history has unresponded operations")
    out.sort(key=lambda e: e.invoke_index)
    return out


def _overlap_clusters(execs: list[OperationExecution]) -> list[list[OperationExecution]]:
    """Split the history at quiescent points: no operation spans a cluster
    boundary, so clusters can be checked independently against a running
    set."""
    clusters: list[list[OperationExecution]] = []
    cur: list[OperationExecution] = []
    frontier = -1
    for e in execs:
        if cur and e.invoke_index > frontier:
            clusters.append(cur)
            cur = []
        cur.append(e)
        frontier = max(frontier, e.response_index)
    if cur:
        clusters.append(cur)
    return clusters


def check_history(log: HistoryLog, window: int = 8) -> tuple[bool, list, frozenset]:
    """Windowed plus whole-history linearizability of a completed log.

    Each maximal overlapping cluster of at most ``window`` operations is
    checked with the factorial-search oracle relative to the running set;
    larger clusters and the whole history go through the memoised
    unbounded search.  Returns (ok, problems, final linearized set).
    """
    problems: list[str] = []
    execs = _history_executions(log)
    running: frozenset = frozenset()
    for cluster in _overlap_clusters(execs):
        # Clusters within the window go through the same search the
        # factorial oracle uses; bigger ones lean on its memoisation.
        order = _cluster_order(cluster, running)
        if order is None:
            size = "window" if len(cluster) <= window else "large cluster"
            problems.append(f"{size} at {cluster[0].invoke_index} not linearizable")
            break
        for e in order:
            _, running = _sequential_apply(running, e.kind, e.key)
    else:
        full = find_linearization(execs)
        if full is None:
            problems.append("whole history not linearizable")
        else:
            replayed: frozenset = frozenset()
            for e in full:
                _, replayed = _sequential_apply(replayed, e.kind, e.key)
            if replayed != running:
                problems.append("windowed and whole-history final sets disagree")
            running = replayed
    return not problems, problems, running


def _cluster_order(cluster, start: frozenset):
    from .linearize import _search_order

    return _search_order(tuple(cluster), start, {})


def removed_node_violations(h: ConcurrentSetHandle) -> list[str]:
    """Every removed node must stay focused on the children it held at its
    removal; checked against the snapshot taken under the removal locks."""
    problems = []
    for n in h.all_nodes:
        if not n.removed:
            continue
        if n.frozen != (n.left, n.right):
            problems.append(f"removed node {n.key} mutated after removal")
        if n.left is not n.right or n.left is None:
            problems.append(f"removed node {n.key} not focused")
    return problems


def quiescent_bst_violations(h: ConcurrentSetHandle) -> list[str]:
    """At quiescence the reachable region must be a BST with unique keys."""
    problems = []
    keys: list[int] = []

    def walk(n, lo, hi):
        if n is None:
            return
        if not (lo < n.key < hi):
            problems.append(f"key {n.key} out of range ({lo}, {hi})")
        if n.removed:
            problems.append(f"removed node with key {n.key} still reachable")
        keys.append(n.key)
        walk(n.left, lo, n.key)
        walk(n.right, n.key, hi)

    walk(h.root.left, -INF, INF)
    if len(keys) != len(set(keys)):
        problems.append("duplicate keys among reachable nodes")
    return problems


def stress(config: StressConfig) -> StressOutcome:
    """Seeded random operation mix on worker threads with concurrent
    maintenance; verdict from offline history checking plus a final
    snapshot comparison.

    The interpreter's default thread switch interval is far coarser than
    an operation, which would make the run effectively serial; it is
    tightened for the duration so schedules genuinely interleave.
    """
    import sys

    h = ConcurrentSetHandle()
    stop = threading.Event()
    old_interval = sys.getswitchinterval()
    sys.setswitchinterval(2e-6)

    def worker(tid: int):
        rng = random.Random((config.seed << 16) ^ tid)
        ops = (set_contains, set_insert, set_delete)
        for _ in range(config.ops_per_thread):
            op = rng.choice(ops)
            op(h, rng.randint(1, config.keys), tid)

    def maintainer():
        while not stop.is_set():
            if maintenance_pass(h) == 0:
                stop.wait(0.0005)  # idle tree: back off instead of spinning

    threads = [
        threading.Thread(target=worker, args=(tid,), name=f"worker-{tid}")
        for tid in range(1, config.threads + 1)
    ]
    maint = threading.Thread(target=maintainer, name="maintenance")
    try:
        if config.maintenance:
            maint.start()
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        stop.set()
        if config.maintenance:
            maint.join()
    finally:
        sys.setswitchinterval(old_interval)

    ok, problems, linearized = check_history(h.log, config.window)
    snapshot = frozenset(k for k in _inorder_live_keys(h))
    if ok and snapshot != linearized:
        ok = False
        problems.append(
            f"final snapshot {sorted(snapshot)} differs from linearized {sorted(linearized)}"
        )
    problems.extend(quiescent_bst_violations(h))
    problems.extend(removed_node_violations(h))
    if problems:
        ok = False
    return StressOutcome(
        ok, h.log, problems, snapshot, len(h.log.events) // 2, h.backtracks, h.retries
    )


def _inorder_live_keys(h: ConcurrentSetHandle):
    def walk(n):
        if n is None:
            return
        yield from walk(n.left)
        if not n.deleted:
            yield n.key
        yield from walk(n.right)

    yield from walk(h.root.left)

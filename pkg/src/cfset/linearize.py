"""Linearization of recorded traces.

Each completed worker operation is carved out of a trace, turned into an
abstract scan (the hand-over-hand traversal abstracted to per-step
triples), and assigned a linearization index: mutating branches take their
own step, value-reporting branches take the earliest moment the scan's
final target was genuinely search-connected with the observed deletion
status.  A factorial-search oracle over real-time order cross-validates
the whole assignment; the two must always agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

from .checker import potential_connectivity
from .core import BOT, M0, SYS, Key
from .explorer import Trace
from .semantics import (
    CONTAINS,
    DELETE,
    INSERT,
    invoked_kind,
    is_return_step,
    is_worker_invoke,
)

KSEARCH, BACKTRACKING, DELAYING = "KSearch", "Backtracking", "Delaying"


class OperationExecution(NamedTuple):
    pid: int
    kind: str
    key: int
    invoke_index: int  # pre-state index of the invocation step
    response_index: Optional[int]  # pre-state index of the return step
    return_val: Optional[bool]

    @property
    def complete(self) -> bool:
        return self.response_index is not None


class ScanTriple(NamedTuple):
    index: int
    x: int
    y: int
    kind: str


class ScanSequence(NamedTuple):
    pid: int
    key: Key
    triples: tuple


class MalformedTrace(Exception):
    pass


def carve_operations(trace: Trace) -> list[OperationExecution]:
    """Partition each worker's steps into invoke..return intervals; an
    unfinished trailing operation is kept with no response index."""
    open_ops: dict[int, tuple] = {}
    done: list[OperationExecution] = []
    for j, label in enumerate(trace.labels):
        if label.pid == SYS:
            continue
        if is_worker_invoke(label):
            if label.pid in open_ops:
                raise MalformedTrace(f"process {label.pid} invoked twice")
            open_ops[label.pid] = (invoked_kind(label), label.args[0], j)
        elif is_return_step(label):
            if label.pid not in open_ops:
                raise MalformedTrace(f"return without invoke by {label.pid}")
            kind, key, j_inv = open_ops.pop(label.pid)
            ret = trace.state(j + 1).workers[label.pid].ret
            done.append(OperationExecution(label.pid, kind, key, j_inv, j, ret))
    for pid, (kind, key, j_inv) in sorted(open_ops.items()):
        done.append(OperationExecution(pid, kind, key, j_inv, None, None))
    done.sort(key=lambda e: e.invoke_index)
    return done


_TRIPLE_KIND = {
    "Loop": KSEARCH,
    "Retry": KSEARCH,
    "ToC2": DELAYING,
    "ToD2": DELAYING,
    "ToI2": DELAYING,
    "Backtrack": BACKTRACKING,
}


def extract_kscan(trace: Trace, exec_: OperationExecution) -> ScanSequence:
    """The abstract scan induced by an operation's non-returning steps.

    Invocations and the critical-section entry steps contribute delaying
    triples, search loops and the retry branch contribute search triples,
    the wake-up-on-removed branch contributes a backtracking triple, and
    the look-ahead-lost transition into the insertion section contributes
    nothing at all: its registers carry over unchanged.
    """
    if not exec_.complete:
        raise ValueError("operation still pending")
    triples: list[ScanTriple] = []
    for j in range(exec_.invoke_index, exec_.response_index):
        label = trace.labels[j]
        if label.pid != exec_.pid:
            continue
        if label.instr == "I1" and label.branch == "ToI3":
            continue
        post = trace.state(j + 1)
        w = post.workers[exec_.pid]
        if label.instr == M0:
            kind = DELAYING
        else:
            kind = _TRIPLE_KIND.get(label.branch)
            if kind is None:
                raise MalformedTrace(f"unexpected scan step {label}")
        triples.append(ScanTriple(j + 1, w.cur, w.nxt, kind))
    state0 = trace.state(exec_.invoke_index + 1)
    return ScanSequence(exec_.pid, state0.workers[exec_.pid].key, tuple(triples))


def validate_kscan(trace: Trace, scan: ScanSequence) -> bool:
    """Re-check all four clauses of the abstract-scan shape against the
    stored states."""
    k = scan.key
    ts = scan.triples
    if not ts:
        return False
    last = -1
    for t in ts:
        if t.index <= last:
            return False
        last = t.index
        s = trace.state(t.index)
        if t.x == BOT or not potential_connectivity(s, t.x, k):
            return False
        holds = {
            KSEARCH: s.k_step(t.x, k) == t.y and t.x != t.y,
            BACKTRACKING: s.key_of(t.x) == k
            and s.removed(t.x)
            and t.y == s.right(t.x),
            DELAYING: t.y == t.x,
        }
        if not holds[t.kind] or sum(holds.values()) != 1:
            return False
    for a, b in zip(ts, ts[1:]):
        sa = trace.state(a.index)
        handshake = a.y != BOT and b.x == a.y
        stutter = (a.y == BOT or sa.key_of(a.x) == k) and b.x == a.x
        if not (handshake or stutter):
            return False
    return True


def scanning_witness(trace: Trace, scan: ScanSequence) -> Optional[int]:
    """The smallest index within the scan's span at which the final target
    is search-connected with its final deletion status; None means the
    guarantee failed."""
    first, final = scan.triples[0], scan.triples[-1]
    k = scan.key
    if first.y == BOT or not trace.state(first.index).k_connected(first.y, k):
        raise ValueError("scan does not start from a search-connected node")
    ref_deleted = trace.state(final.index).deleted(final.y)
    for j in range(first.index, final.index + 1):
        s = trace.state(j)
        if final.y in s.nodes and s.k_connected(final.y, k):
            if s.deleted(final.y) == ref_deleted:
                return j
    return None


# ---------------------------------------------------------------------------
# Linearization assignment
# ---------------------------------------------------------------------------


@dataclass
class Assignment:
    op: OperationExecution
    lin_index: int
    tag: str  # Ret1 | Ret2a | Ret2b | Ret3a | Ret3b

    @property
    def mutating(self) -> bool:
        return self.tag in ("Ret2a", "Ret3a")


@dataclass
class LinearizationResult:
    assignments: list
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


_MUTATING_BRANCHES = {"Delete", "Undelete", "InsertLeft", "InsertRight"}


def assign_linearizations(trace: Trace) -> LinearizationResult:
    """One linearization index per completed operation, each verified
    against its return-value clause; failures carry the operation and the
    reason instead of an index."""
    assignments: list[Assignment] = []
    failures: list = []
    for e in carve_operations(trace):
        if not e.complete:
            raise ValueError("trace has pending operations")
        r = e.response_index
        ret_label = trace.labels[r]
        set_r = trace.state(r).compute_set()
        set_r1 = trace.state(r + 1).compute_set()

        if ret_label.branch in _MUTATING_BRANCHES:
            if e.kind == DELETE:
                ok = e.key in set_r and set_r1 == set_r - {e.key}
                tag = "Ret2a"
            else:
                ok = e.key not in set_r and set_r1 == set_r | {e.key}
                tag = "Ret3a"
            if not ok:
                failures.append((e, "mutating step does not move the set as returned"))
                continue
            lin = r
        else:
            scan = extract_kscan(trace, e)
            if not validate_kscan(trace, scan):
                failures.append((e, "operation does not induce a valid scan"))
                continue
            final = scan.triples[-1]
            if ret_label.branch != "ReturnFalse" and r > final.index:
                # The value-reporting branches re-read the node at return
                # time; one more delaying triple carries the scan there.
                scan = ScanSequence(
                    scan.pid,
                    scan.key,
                    scan.triples + (ScanTriple(r, final.x, final.x, DELAYING),),
                )
                if not validate_kscan(trace, scan):
                    failures.append((e, "extended scan invalid"))
                    continue
            j = scanning_witness(trace, scan)
            if j is None:
                failures.append((e, "no witness index for the scan"))
                continue
            set_j = trace.state(j).compute_set()
            if e.kind == CONTAINS:
                ok, tag = e.return_val == (e.key in set_j), "Ret1"
            elif e.kind == DELETE:
                ok, tag = e.key not in set_j, "Ret2b"
            else:
                ok, tag = e.key in set_j, "Ret3b"
            if not ok:
                failures.append((e, "return value wrong at witness index"))
                continue
            lin = j

        # Every step of the operation except its own mutating one must
        # leave the set unchanged.
        for t in range(e.invoke_index, r + 1):
            if trace.labels[t].pid != e.pid:
                continue
            if ret_label.branch in _MUTATING_BRANCHES and t == r:
                continue
            if trace.state(t).compute_set() != trace.state(t + 1).compute_set():
                failures.append((e, f"non-mutating step {t} changed the set"))
                break
        else:
            assignments.append(Assignment(e, lin, tag))
    return LinearizationResult(assignments, failures)


def replay_by_linearization(trace: Trace, result: LinearizationResult) -> list[str]:
    """Cross-check a successful assignment: walking the trace while
    applying mutating operations at their indices must reproduce every set
    snapshot, and evaluating each reporting operation at its index must
    reproduce its return value.  Returns a list of discrepancies."""
    problems = []
    nonmut: dict[int, list[Assignment]] = {}
    mut: dict[int, Assignment] = {}
    for a in result.assignments:
        if a.mutating:
            if a.lin_index in mut:
                problems.append(f"two mutations linearized at {a.lin_index}")
            mut[a.lin_index] = a
        else:
            nonmut.setdefault(a.lin_index, []).append(a)
    s: frozenset = frozenset()
    for i in range(len(trace) + 1):
        if trace.state(i).compute_set() != s:
            problems.append(f"set snapshot mismatch at index {i}")
            break
        for a in nonmut.get(i, ()):  # reporting operations read here
            want, _ = _sequential_apply(s, a.op.kind, a.op.key)
            if want != a.op.return_val:
                problems.append(f"operation {a.op} wrong at its index")
        a = mut.get(i)
        if a is not None:
            got, s = _sequential_apply(s, a.op.kind, a.op.key)
            if got is not True:
                problems.append(f"mutating operation {a.op} rejected by the set")
    return problems


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------


def _sequential_apply(s: frozenset, kind: str, key: int):
    if kind == CONTAINS:
        return key in s, s
    if kind == INSERT:
        return (False, s) if key in s else (True, s | {key})
    if kind == DELETE:
        return (True, s - {key}) if key in s else (False, s)
    raise ValueError(kind)


def brute_force_linearizable(execs: list[OperationExecution]) -> bool:
    """Permutation search over at most eight completed operations: is there
    a total order extending real-time precedence whose sequential replay
    reproduces every return value?"""
    if len(execs) > 8:
        raise ValueError("oracle capped at eight operations")
    if any(not e.complete for e in execs):
        raise ValueError("oracle needs completed operations")
    return _search_order(tuple(execs), frozenset(), {}) is not None


def find_linearization(execs: list[OperationExecution]) -> Optional[list]:
    """Unbounded variant of the same search with failure memoisation; used
    for whole-history checking of runtime stress logs."""
    if any(not e.complete for e in execs):
        raise ValueError("needs completed operations")
    return _search_order(tuple(execs), frozenset(), {})


def _search_order(remaining: tuple, s: frozenset, dead: dict) -> Optional[list]:
    if not remaining:
        return []
    key = (frozenset(id(e) for e in remaining), s)
    if key in dead:
        return None
    min_res = min(e.response_index for e in remaining)
    for e in remaining:
        if e.invoke_index > min_res:
            continue
        got, s2 = _sequential_apply(s, e.kind, e.key)
        if got != e.return_val:
            continue
        rest = tuple(x for x in remaining if x is not e)
        sub = _search_order(rest, s2, dead)
        if sub is not None:
            return [e] + sub
    dead[key] = True
    return None


# ---------------------------------------------------------------------------
# History-level guarantees, checked over recorded traces
# ---------------------------------------------------------------------------


def check_connectivity_monotone(trace: Trace, keys: Iterable[int]) -> list[str]:
    """Once a node lies on a key's search path, it lies on it again at
    every later moment at which it is reachable at all."""
    from .core import fin

    problems = []
    for kv in keys:
        k = fin(kv)
        seen_at: dict[int, int] = {}
        for i, s in enumerate(trace.states):
            for a in s.nodes:
                if a == BOT:
                    continue  # the bottom sentinel leaves a path when its key arrives
                if s.k_connected(a, k):
                    seen_at.setdefault(a, i)
                elif a in seen_at and s.path_connected(a):
                    problems.append(f"node {a} reachable but off the {kv}-path at {i}")
    return problems


def check_deletion_frozen_offpath(trace: Trace, keys: Iterable[int]) -> list[str]:
    """A node that falls off the reachable region right after being on a
    search path keeps its deletion flag forever after."""
    from .core import fin

    problems = []
    states = trace.states
    for kv in keys:
        k = fin(kv)
        for i in range(len(states) - 1):
            s, t = states[i], states[i + 1]
            for a in s.nodes:
                if a == BOT or not s.k_connected(a, k):
                    continue
                if t.path_connected(a):
                    continue
                flag = s.deleted(a)
                for j in range(i + 1, len(states)):
                    if states[j].deleted(a) != flag:
                        problems.append(f"node {a} flag changed after falling off at {i}")
                        break
    return problems

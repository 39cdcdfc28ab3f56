"""State-space exploration: breadth-first search with canonical-form
deduplication, seeded random walks, and deterministic replay of recorded
step sequences.

Canonical form.  Two states that differ only in the identity of their
addresses describe the same memory shape, so dedup keys rename addresses
into a fixed visiting order: the two sentinels, the breadth-first order of
the tree below the root, every process register in a fixed order, then any
leftover addresses by allocation order.  The renamed state is kept as a
plain tuple, so key equality *is* isomorphism; there is no hash-only
shortcut to get collisions wrong.

Budgets.  The master loop is infinite, so exploration bounds it: each
worker may start at most ``ops_per_worker`` operations, the maintenance
process at most ``sys_budget``, and the search stops ``depth_limit`` steps
from the initial state.
"""

from __future__ import annotations

import hashlib
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .checker import CheckSuite, Violation, check_state, check_step
from .core import BOT, M0, ROOT, SYS, State, initial_state
from .semantics import (
    RETURN_BRANCHES,
    StepLabel,
    StepNotEnabled,
    apply_step,
    enabled_steps,
    is_worker_invoke,
)


@dataclass
class ExploreConfig:
    num_workers: int = 2
    keys: tuple = (1, 2, 3)
    ops_per_worker: int = 2
    sys_budget: int = 2
    depth_limit: int = 12
    pt2_variant: str = "corrected"
    max_states: int = 5_000_000
    stop_on_first: bool = False
    seed: int = 0
    walks: int = 100
    walk_length: int = 40

    def suite(self, disabled: frozenset = frozenset()) -> CheckSuite:
        return CheckSuite(tuple(self.keys), self.pt2_variant, disabled)


# ---------------------------------------------------------------------------
# Canonical form
# ---------------------------------------------------------------------------


def _canonical_order(state: State) -> dict[int, int]:
    order: dict[int, int] = {ROOT: 0, BOT: 1}

    def visit(a: int) -> None:
        if a not in order:
            order[a] = len(order)

    queue = deque([ROOT])
    seen = {ROOT}
    while queue:
        a = queue.popleft()
        visit(a)
        for c in (state.left(a), state.right(a)):
            if c not in seen:
                seen.add(c)
                queue.append(c)
    for pid in sorted(state.workers):
        w = state.workers[pid]
        visit(w.cur)
        visit(w.nxt)
    s = state.sysregs
    for a in (s.parent, s.target, s.rchild, s.lchild, s.rl, s.lr, s.child):
        visit(a)
    for a in sorted(state.nodes):
        visit(a)
    return order


def canonical_digest(state: State) -> tuple:
    """The full renamed state as a tuple; equal digests are isomorphic
    states by construction."""
    got = state._cache.get("digest")
    if got is not None:
        return got
    ren = _canonical_order(state)
    nodes = tuple(
        (
            ren[a],
            (n.key.rank, n.key.value),
            ren[n.left],
            ren[n.right],
            n.deleted,
            n.removed,
        )
        for a, n in sorted(state.nodes.items(), key=lambda kv: ren[kv[0]])
    )
    locks = tuple(sorted((ren[a], p) for a, p in state.locks.items()))
    workers = tuple(
        (pid, w.ctrl, (w.key.rank, w.key.value), ren[w.cur], ren[w.nxt], w.ret)
        for pid, w in sorted(state.workers.items())
    )
    s = state.sysregs
    sysregs = (
        s.ctrl,
        ren[s.parent],
        s.left_side,
        ren[s.target],
        ren[s.rchild],
        ren[s.lchild],
        ren[s.rl],
        ren[s.lr],
        ren[s.child],
    )
    digest = (nodes, locks, workers, sysregs)
    state._cache["digest"] = digest
    return digest


def digest_hex(state: State) -> str:
    return hashlib.sha256(repr(canonical_digest(state)).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Traces and replay
# ---------------------------------------------------------------------------


class Trace:
    """An initial state plus the labelled steps applied to it."""

    def __init__(self, initial: State):
        self.initial = initial
        self.steps: list[tuple[StepLabel, State]] = []

    @property
    def states(self) -> list[State]:
        return [self.initial] + [s for _, s in self.steps]

    @property
    def labels(self) -> list[StepLabel]:
        return [l for l, _ in self.steps]

    def state(self, i: int) -> State:
        return self.initial if i == 0 else self.steps[i - 1][1]

    def __len__(self) -> int:
        return len(self.steps)

    def extend(self, label: StepLabel, check: bool = True) -> State:
        post = apply_step(self.state(len(self)), label, check=check)
        self.steps.append((label, post))
        return post


def replay(
    labels: Iterable[StepLabel],
    num_workers: int,
    suite: Optional[CheckSuite] = None,
    check: bool = True,
) -> tuple[Trace, list[Violation]]:
    """Deterministically re-run a recorded label sequence, optionally
    checking every state and transition.  A disabled label raises
    :class:`StepNotEnabled` wrapped with the failing index."""
    trace = Trace(initial_state(num_workers))
    violations: list[Violation] = []
    if suite is not None:
        violations.extend(check_state(trace.initial, suite))
    for i, label in enumerate(labels):
        pre = trace.state(len(trace))
        try:
            post = trace.extend(label, check=check)
        except StepNotEnabled as e:
            raise StepNotEnabled(f"step {i} ({label}): {e}") from None
        if suite is not None:
            violations.extend(check_step(pre, label, post, suite))
            violations.extend(check_state(post, suite))
    return trace, violations


# -- script files ------------------------------------------------------------


def _format_sys_args(pre: State, label: StepLabel) -> str:
    parent, left_side = label.args
    if parent == ROOT:
        ref = "root"
    else:
        ref = str(pre.key_of(parent))
    return f"{ref} {'true' if left_side else 'false'}"


def serialize_labels(labels: Iterable[StepLabel], num_workers: int) -> str:
    """One line per step.  Maintenance invocations name their parent node
    by key (unique among reachable nodes), so scripts survive address
    renaming."""
    trace = Trace(initial_state(num_workers))
    lines = []
    for label in labels:
        pre = trace.state(len(trace))
        if label.pid == SYS and label.instr == M0:
            lines.append(f"0 M0 {label.branch} {_format_sys_args(pre, label)}")
        elif is_worker_invoke(label):
            lines.append(f"{label.pid} M0 {label.branch} {label.args[0]}")
        else:
            lines.append(f"{label.pid} {label.instr} {label.branch}")
        trace.extend(label)
    return "\n".join(lines) + "\n"


def _resolve_key_ref(state: State, ref: str) -> int:
    if ref == "root":
        return ROOT
    want = int(ref)
    for a in state.reachable():
        n = state.node(a)
        if n.key.finite and n.key.value == want and not n.removed:
            return a
    raise StepNotEnabled(f"no reachable node with key {want}")


def parse_script(text: str) -> list[tuple]:
    """Parse a script into raw (pid, instr, branch, argstrings) rows;
    argument resolution happens against the state during replay."""
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise ValueError(f"malformed script line: {raw!r}")
        rows.append((int(parts[0]), parts[1], parts[2], tuple(parts[3:])))
    return rows


def replay_script(
    text: str, num_workers: int, suite: Optional[CheckSuite] = None
) -> tuple[Trace, list[Violation]]:
    trace = Trace(initial_state(num_workers))
    violations: list[Violation] = []
    if suite is not None:
        violations.extend(check_state(trace.initial, suite))
    for i, (pid, instr, branch, args) in enumerate(parse_script(text)):
        pre = trace.state(len(trace))
        if pid == SYS and instr == M0:
            parent = _resolve_key_ref(pre, args[0])
            label = StepLabel(pid, instr, branch, (parent, args[1] == "true"))
        elif instr == M0:
            label = StepLabel(pid, instr, branch, (int(args[0]),))
        else:
            label = StepLabel(pid, instr, branch)
        try:
            post = trace.extend(label)
        except StepNotEnabled as e:
            raise StepNotEnabled(f"script line {i + 1} ({label}): {e}") from None
        if suite is not None:
            violations.extend(check_step(pre, label, post, suite))
            violations.extend(check_state(post, suite))
    return trace, violations


# ---------------------------------------------------------------------------
# Exhaustive exploration
# ---------------------------------------------------------------------------


@dataclass
class ExplorationReport:
    states_visited: int = 0
    transitions: int = 0
    violations: list = field(default_factory=list)
    frontier_truncated: bool = False
    fully_blocked: int = 0
    depth_profile: list = field(default_factory=list)
    violation_scripts: list = field(default_factory=list)
    complete_leaf_labels: list = field(default_factory=list)
    return_events: list = field(default_factory=list)
    sampled_states: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _budget_filter(labels, ops_left: tuple, sys_left: int):
    for label in labels:
        if label.instr == M0:
            if label.pid == SYS:
                if sys_left <= 0:
                    continue
            elif ops_left[label.pid - 1] <= 0:
                continue
        yield label


def _spend(label: StepLabel, ops_left: tuple, sys_left: int):
    if label.instr == M0:
        if label.pid == SYS:
            return ops_left, sys_left - 1
        spent = list(ops_left)
        spent[label.pid - 1] -= 1
        return tuple(spent), sys_left
    return ops_left, sys_left


def explore(
    config: ExploreConfig,
    suite: Optional[CheckSuite] = None,
    collect_traces: bool = False,
    sample_stride: int = 0,
) -> ExplorationReport:
    """Bounded breadth-first exploration with full checking.

    Every unique state is checked once; every transition (including those
    into already-visited states) is checked once.  Each violation carries a
    replayable label path from the initial state.  When ``collect_traces``
    is set, the label paths of every all-idle state are kept for
    linearization checking, as are the paths of every operation-completing
    transition in the search tree.  A positive ``sample_stride`` keeps
    every stride-th unique state for external oracle comparison.
    """
    suite = suite or config.suite()
    report = ExplorationReport()
    init = initial_state(config.num_workers)
    init_key = (
        canonical_digest(init),
        (config.ops_per_worker,) * config.num_workers,
        config.sys_budget,
    )

    def record(vs: list[Violation], path: tuple):
        for v in vs:
            report.violations.append(v)
            report.violation_scripts.append(path)

    record(check_state(init, suite), ())
    queue = deque(
        [(init, (config.ops_per_worker,) * config.num_workers, config.sys_budget, ())]
    )
    seen = {init_key}
    depth = 0
    layer_left = 1
    next_layer = 0
    report.depth_profile.append(1)

    while queue:
        if layer_left == 0:
            depth += 1
            layer_left = next_layer
            next_layer = 0
            report.depth_profile.append(layer_left)
            if layer_left == 0:
                break
        state, ops_left, sys_left, path = queue.popleft()
        layer_left -= 1
        report.states_visited += 1
        if sample_stride and report.states_visited % sample_stride == 0:
            report.sampled_states.append(state)
        if collect_traces and _all_idle(state):
            report.complete_leaf_labels.append(path)

        if depth >= config.depth_limit:
            continue

        labels = list(
            _budget_filter(enabled_steps(state, config.keys), ops_left, sys_left)
        )
        if not labels:
            if _mid_operation(state):
                report.fully_blocked += 1
            continue

        for label in labels:
            post = apply_step(state, label, check=False)
            report.transitions += 1
            new_path = path + (label,)
            record(check_step(state, label, post, suite), new_path)
            if collect_traces and label.pid != SYS and label.branch in RETURN_BRANCHES:
                report.return_events.append(new_path)
            ops2, sys2 = _spend(label, ops_left, sys_left)
            key = (canonical_digest(post), ops2, sys2)
            if key not in seen:
                seen.add(key)
                record(check_state(post, suite), new_path)
                if len(seen) > config.max_states:
                    report.frontier_truncated = True
                    return report
                queue.append((post, ops2, sys2, new_path))
                next_layer += 1
            if config.stop_on_first and report.violations:
                return report

    return report


def _all_idle(state: State) -> bool:
    return state.sysregs.ctrl == M0 and all(
        w.ctrl == M0 for w in state.workers.values()
    )


def _mid_operation(state: State) -> bool:
    return state.sysregs.ctrl != M0 or any(
        w.ctrl != M0 for w in state.workers.values()
    )


# ---------------------------------------------------------------------------
# Random walks
# ---------------------------------------------------------------------------


def random_walk(
    config: ExploreConfig,
    suite: Optional[CheckSuite] = None,
    run_to_quiescence: bool = True,
) -> tuple[list[Trace], list[Violation]]:
    """Seeded uniform walks over the enabled labels.  After ``walk_length``
    random steps each walk keeps stepping only mid-operation processes so
    operations finish, which makes the trace usable for linearization;
    walks that deadlock are kept but flagged by their pending operations.
    """
    suite = suite or config.suite()
    traces: list[Trace] = []
    violations: list[Violation] = []
    for i in range(config.walks):
        rng = random.Random((config.seed << 20) ^ i)
        trace = Trace(initial_state(config.num_workers))
        violations.extend(check_state(trace.initial, suite))
        ops_left = (config.ops_per_worker,) * config.num_workers
        sys_left = config.sys_budget
        for _ in range(config.walk_length):
            state = trace.state(len(trace))
            labels = list(
                _budget_filter(enabled_steps(state, config.keys), ops_left, sys_left)
            )
            if not labels:
                break
            label = rng.choice(labels)
            ops_left, sys_left = _spend(label, ops_left, sys_left)
            post = trace.extend(label, check=False)
            violations.extend(check_step(state, label, post, suite))
            violations.extend(check_state(post, suite))
        if run_to_quiescence:
            while True:
                state = trace.state(len(trace))
                labels = [
                    l
                    for l in enabled_steps(state, config.keys)
                    if l.instr != M0
                ]
                if not labels:
                    break
                label = rng.choice(labels)
                post = trace.extend(label, check=False)
                violations.extend(check_step(state, label, post, suite))
                violations.extend(check_state(post, suite))
        traces.append(trace)
    return traces, violations

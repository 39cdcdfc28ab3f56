"""State invariants, control-dependent frame conditions, and step
properties of the contention-friendly set, as named, individually
toggleable rules.

Rules come in two kinds.  A *state rule* examines a single state; a *step
rule* examines a (pre, label, post) transition.  Step rules whose claim is
only meaningful from a well-formed pre-state short-circuit to pass when
the pre-state already fails regularity: the regularity violation is the
primary report and cascading noise would mask it.

``pt2_variant`` selects between two readings of the second clause of the
"potentially connected while floating" predicate: the default
``corrected`` form asks for *some* child that is search-connected, while
``original`` pins the child on the search side of the floating node.  The
original form admits violations of the floating-potential-stable step
property (an insertion can retire the bottom sentinel from exactly that
search path); the corrected form does not at small key universes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

from .core import (
    BOT,
    C1,
    C2,
    D1,
    D2,
    F6,
    F7,
    F8,
    F9,
    I1,
    I2,
    I3,
    M0,
    NEG_INF,
    POS_INF,
    R6,
    R7,
    R8,
    R9,
    ROOT,
    SYS,
    V6,
    V7,
    V8,
    V9,
    Key,
    State,
    fin,
    resolve_new,
)
from .semantics import StepLabel

CORRECTED = "corrected"
ORIGINAL = "original"


# ---------------------------------------------------------------------------
# Structural predicates
# ---------------------------------------------------------------------------


def is_focused(state: State, x: int) -> bool:
    """Both children equal and real: the shape every removed node keeps."""
    n = state.node(x)
    return n.left == n.right and n.left != BOT


def is_pre_removed(state: State, x: int) -> bool:
    """Unlinked from the root but not yet flagged as removed."""
    return x != BOT and not state.removed(x) and not state.path_connected(x)


def parents_of(state: State, x: int) -> frozenset:
    key = ("parents", x)
    got = state._cache.get(key)
    if got is None:
        got = frozenset(
            y for y in state.reachable() if state.points_to(y, x)
        )
        state._cache[key] = got
    return got


def is_confluent(state: State, x: int) -> bool:
    """Two distinct reachable nodes point at ``x`` (arises mid-rotation)."""
    return x != BOT and len(parents_of(state, x)) >= 2


def _descend(state: State, start: int) -> frozenset:
    if start == BOT:
        return frozenset()
    seen = {start}
    stack = [start]
    while stack:
        n = state.node(stack.pop())
        for c in (n.left, n.right):
            if c != BOT and c not in seen:
                seen.add(c)
                stack.append(c)
    return frozenset(seen)


def left_descendants(state: State, x: int) -> frozenset:
    return _descend(state, state.left(x))


def right_descendants(state: State, x: int) -> frozenset:
    if x == ROOT:
        return frozenset()
    return _descend(state, state.right(x))


def is_tree_like(state: State, x: int) -> bool:
    """Every descendant sits on the correct side of ``x`` key-wise.

    The descendant walks carry a visited set, so evaluation terminates even
    on a cyclic structure; a cycle simply shows up as a misplaced
    descendant somewhere.
    """
    got = state._cache.get(("tree", x))
    if got is not None:
        return got
    if x in (ROOT, BOT):
        state._cache[("tree", x)] = True
        return True
    ld = left_descendants(state, x)
    rd = right_descendants(state, x)
    kx = state.key_of(x)
    ok = True
    for y in (ld | rd) - {x}:
        ky = state.key_of(y)
        if (y in ld and not ky < kx) or (y in rd and not ky > kx):
            ok = False
            break
    state._cache[("tree", x)] = ok
    return ok


class PotConn(NamedTuple):
    """Judgement of potential search-connectivity.

    ``kind`` is one of ``PT1`` (search-connected), ``PT2`` (floating with a
    connected neighbour), ``PT3`` (removed, chained to a live anchor) or
    ``NotConnected``.  ``anchor`` is the neighbour/live node justifying PT2
    or PT3 and ``chain`` the removed nodes walked to reach it.
    """

    kind: str
    anchor: Optional[int] = None
    chain: tuple = ()

    def __bool__(self) -> bool:
        return self.kind != "NotConnected"


def _pt2_clause(state: State, x: int, k: Key, variant: str) -> Optional[int]:
    """The neighbour-connectivity clause of PT2; returns a witness child or
    None.  Corrected: some child is k-connected.  Original: the child on
    the k side must be (vacuous on a key match)."""
    n = state.node(x)
    if variant == ORIGINAL:
        y = state.k_step(x, k)
        if y is None:
            return x  # key match: conditional clause holds vacuously
        return y if state.k_connected(y, k) else None
    for y in (n.left, n.right):
        if state.k_connected(y, k):
            return y
    return None


def potential_connectivity(
    state: State, x: int, k: Key, variant: str = CORRECTED
) -> PotConn:
    if state.k_connected(x, k):
        return PotConn("PT1")
    if is_pre_removed(state, x):
        anchor = _pt2_clause(state, x, k, variant)
        if anchor is not None and state.k_connected(state.sysregs.parent, k):
            return PotConn("PT2", anchor)
        return PotConn("NotConnected")
    if state.removed(x):
        # Walk through removed nodes; every non-removed node reached is a
        # candidate anchor and must itself satisfy PT1 or PT2.
        seen = {x}
        prev = {x: None}
        stack = [x]
        anchors = []
        while stack:
            t = stack.pop()
            n = state.node(t)
            for c in (n.left, n.right):
                if c in seen:
                    continue
                seen.add(c)
                prev[c] = t
                if state.removed(c):
                    stack.append(c)
                else:
                    anchors.append(c)
        for y in anchors:
            sub = potential_connectivity(state, y, k, variant)
            if sub.kind in ("PT1", "PT2"):
                chain = []
                t = prev[y]
                while t is not None:
                    chain.append(t)
                    t = prev[t]
                return PotConn("PT3", y, tuple(reversed(chain)))
    return PotConn("NotConnected")


def is_regular(state: State, variant: str = CORRECTED):
    """The three-part well-formedness of a state; returns ``(ok, witness)``.

    Anchor part: the maintenance parent register is connected along the
    target's key and its key sits on the announced side.  Register part:
    every worker's two traversal registers are potentially connected for
    the worker's own search key.  Shape part: at most one reachable node is
    misshapen, and only the rotation target mid-rotation.
    """
    cached = state._cache.get(("regular", variant))
    if cached is not None:
        return cached
    result = _is_regular_uncached(state, variant)
    state._cache[("regular", variant)] = result
    return result


def _is_regular_uncached(state: State, variant: str):
    s = state.sysregs
    tkey = state.key_of(s.target)
    if not state.k_connected(s.parent, tkey):
        return False, {"part": "anchor", "parent": s.parent, "key": tkey}
    if s.target != s.parent:
        pkey = state.key_of(s.parent)
        if s.left_side and not tkey < pkey:
            return False, {"part": "anchor-side", "target": s.target}
        if not s.left_side and not tkey > pkey:
            return False, {"part": "anchor-side", "target": s.target}
    for pid, w in state.workers.items():
        if not potential_connectivity(state, w.cur, w.key, variant):
            return False, {"part": "registers", "pid": pid, "node": w.cur, "key": w.key}
        if w.nxt != BOT and not potential_connectivity(state, w.nxt, w.key, variant):
            return False, {"part": "registers", "pid": pid, "node": w.nxt, "key": w.key}
    rotating = s.ctrl in (F7, F8, R7, R8)
    for x in state.reachable():
        if x in (ROOT, BOT) or is_tree_like(state, x):
            continue
        if not (rotating and x == s.target):
            return False, {"part": "shape", "node": x}
    return True, None


# ---------------------------------------------------------------------------
# Violations and the rule table
# ---------------------------------------------------------------------------


@dataclass
class Violation:
    rule: str
    kind: str  # "state" | "step"
    witness: dict
    states: tuple = ()
    label: Optional[StepLabel] = None

    def describe(self) -> str:
        w = " ".join(f"{k}={v}" for k, v in sorted(self.witness.items()))
        lab = f" step={self.label}" if self.label is not None else ""
        return f"{self.rule} [{self.kind}]{lab} {w}".rstrip()


@dataclass
class CheckSuite:
    """Which rules run, over which key universe, with which PT2 reading."""

    keys: tuple = ()
    pt2_variant: str = CORRECTED
    disabled: frozenset = frozenset()

    def key_values(self):
        return [fin(k) for k in self.keys]

    def on(self, rule: str) -> bool:
        return rule not in self.disabled


def _v(rule, **witness) -> dict:
    witness["rule"] = rule
    return witness


# -- state rules ------------------------------------------------------------


def _rule_key_sentinels(s: State, ctx: CheckSuite):
    for a, n in s.nodes.items():
        if a == ROOT and n.key != POS_INF:
            yield {"node": a}
        elif a == BOT and n.key != NEG_INF:
            yield {"node": a}
        elif a not in (ROOT, BOT) and not n.key.finite:
            yield {"node": a}


def _rule_no_self_loop(s: State, ctx: CheckSuite):
    for a, n in s.nodes.items():
        if a in (ROOT, BOT):
            continue
        if n.left == a or n.right == a:
            yield {"node": a}
    if s.left(ROOT) == ROOT:
        yield {"node": ROOT}


def _rule_sentinel_anchors(s: State, ctx: CheckSuite):
    if s.right(ROOT) != ROOT:
        yield {"node": ROOT}
    if s.left(BOT) != BOT or s.right(BOT) != BOT:
        yield {"node": BOT}


def _rule_root_pointer_window(s: State, ctx: CheckSuite):
    sr = s.sysregs
    for a, n in s.nodes.items():
        if a == ROOT or not (n.left == ROOT or n.right == ROOT):
            continue
        if n.removed:
            continue
        if s.locks.get(ROOT) == SYS and a == sr.target and sr.ctrl in (V8, V9):
            continue
        yield {"node": a}


_CS_LINES = {C1, C2, D1, D2, I1, I2, I3}


def _rule_worker_frames(s: State, ctx: CheckSuite):
    for pid, w in s.workers.items():
        c = w.ctrl
        if c in _CS_LINES and w.cur == BOT:
            yield {"pid": pid, "at": c, "why": "cur is bottom"}
        if c == C1 and s.key_of(w.cur) == w.key:
            yield {"pid": pid, "at": c, "why": "key already matched"}
        if c == C2 and s.key_of(w.cur) != w.key:
            yield {"pid": pid, "at": c, "why": "no key match"}
        if c in (D1, I1) and s.key_of(w.cur) == w.key and not s.removed(w.cur):
            yield {"pid": pid, "at": c, "why": "live key match outside critical section"}
        if c in (D2, I2):
            if s.locks.get(w.cur) != pid:
                yield {"pid": pid, "at": c, "why": "lock not held"}
            if s.key_of(w.cur) != w.key:
                yield {"pid": pid, "at": c, "why": "no key match"}
        if c == I3:
            if s.locks.get(w.cur) != pid:
                yield {"pid": pid, "at": c, "why": "lock not held"}
            if s.key_of(w.cur) == w.key:
                yield {"pid": pid, "at": c, "why": "unexpected key match"}
            if w.nxt != BOT:
                yield {"pid": pid, "at": c, "why": "look-ahead not bottom"}


def _rule_sys_frames(s: State, ctx: CheckSuite):
    r = s.sysregs
    c = r.ctrl
    if c == M0:
        return

    def bad(why):
        return {"at": c, "why": why}

    in_f = c in (F6, F7, F8, F9)
    in_r = c in (R6, R7, R8, R9)
    in_v = c in (V6, V7, V8, V9)

    if r.parent == BOT or s.removed(r.parent):
        yield bad("parent missing or removed")
    if r.target == BOT or s.removed(r.target):
        yield bad("target missing or removed")
    if r.target == r.parent:
        yield bad("target equals parent")
    if s.locks.get(r.parent) != SYS or s.locks.get(r.target) != SYS:
        yield bad("parent/target lock not held")

    if in_f or in_r:
        pivot = r.rchild if in_f else r.lchild
        if s.key_of(r.target) == s.key_of(r.parent):
            yield bad("target and parent share a key")
        if pivot == BOT or s.removed(pivot) or s.locks.get(pivot) != SYS:
            yield bad("pivot missing, removed, or unlocked")
        first3 = c in (F6, F7, F8) or c in (R6, R7, R8)
        if in_f and s.right(r.target) != r.rchild:
            yield bad("target right child drifted")
        if in_r and s.left(r.target) != r.lchild:
            yield bad("target left child drifted")
        if first3 and s.child_on(r.parent, r.left_side) != r.target:
            yield bad("parent edge drifted")
        if c in (F6, R6):
            if in_f and (r.rl != s.left(r.rchild) or r.lchild != s.left(r.target)):
                yield bad("snapshots drifted before clone")
            if in_r and (r.lr != s.right(r.lchild) or r.rchild != s.right(r.target)):
                yield bad("snapshots drifted before clone")
        else:
            clone = resolve_new(s)
            tgt = s.node(r.target)
            cl = s.node(clone)
            if cl.key != tgt.key or clone == r.target or cl.removed:
                yield bad("clone malformed")
            if cl.deleted != tgt.deleted:
                yield bad("clone deletion flag drifted")
            if in_f and (cl.left != r.lchild or cl.right != r.rl or s.left(r.rchild) != clone):
                yield bad("clone children drifted")
            if in_r and (cl.right != r.rchild or cl.left != r.lr or s.right(r.lchild) != clone):
                yield bad("clone children drifted")
        if c == F7 and s.left(r.target) != r.lchild:
            yield bad("target left child drifted")
        if c == R7 and s.right(r.target) != r.rchild:
            yield bad("target right child drifted")
        if c in (F8, F9) and s.left(r.target) != r.rchild:
            yield bad("target not re-pointed at pivot")
        if c in (R8, R9) and s.right(r.target) != r.lchild:
            yield bad("target not re-pointed at pivot")
        if c == F9 and s.child_on(r.parent, r.left_side) != r.rchild:
            yield bad("parent not re-pointed at pivot")
        if c == R9 and s.child_on(r.parent, r.left_side) != r.lchild:
            yield bad("parent not re-pointed at pivot")

    if in_v:
        if not s.deleted(r.target):
            yield bad("removal target not logically deleted")
        if c == V6:
            if s.child_on(r.parent, r.left_side) != r.target:
                yield bad("parent edge drifted")
            if not (s.points_to(r.target, r.child) and s.points_to(r.target, BOT)):
                yield bad("target children drifted")
        if c in (V6, V7):
            tgt = s.node(r.target)
            want = tgt.right if tgt.left == BOT else tgt.left
            if want != r.child:
                yield bad("surviving child drifted")
        if c in (V7, V8):
            if not s.points_to(r.target, r.child):
                yield bad("target lost surviving child")
            if not s.points_to(r.parent, r.child):
                yield bad("parent lost surviving child")
            if s.points_to(r.parent, r.target):
                yield bad("parent still points at target")
        if c in (V8, V9) and not s.points_to(r.target, r.parent):
            yield bad("target not back-pointed at parent")


def _rule_removed_focused(s: State, ctx: CheckSuite):
    for a, n in s.nodes.items():
        if n.removed and not (n.left == n.right and n.left != BOT):
            yield {"node": a}


_FLOAT_WINDOW = (F9, R9, V7, V8, V9)


def _rule_floating_window(s: State, ctx: CheckSuite):
    for a in s.nodes:
        if is_pre_removed(s, a):
            if not (a == s.sysregs.target and s.sysregs.ctrl in _FLOAT_WINDOW):
                yield {"node": a, "sys_at": s.sysregs.ctrl}


def _rule_unreachable_owned(s: State, ctx: CheckSuite):
    reach = s.reachable()
    for a in s.nodes:
        if a == BOT or a in reach:
            continue
        if not (s.removed(a) or s.locks.get(a) == SYS):
            yield {"node": a}


def _rule_removed_unreachable(s: State, ctx: CheckSuite):
    if not is_regular(s, ctx.pt2_variant)[0]:
        return
    reach = s.reachable()
    for a, n in s.nodes.items():
        if n.removed and a in reach:
            yield {"node": a}


def _rule_reachable_acyclic(s: State, ctx: CheckSuite):
    if not is_regular(s, ctx.pt2_variant)[0]:
        return
    reach = s.reachable()
    if BOT not in reach:
        yield {"why": "bottom unreachable"}
    if s.search_path(NEG_INF)[-1] != BOT:
        yield {"why": "bottom off its own search path"}
    witness = _find_cycle(s, reach)
    if witness is not None:
        yield {"why": "cycle", "node": witness}


def _find_cycle(s: State, reach) -> Optional[int]:
    """A node on a reachable cycle, ignoring sentinel self-loops; None if
    the reachable region is acyclic.  Graphs are tiny, recursion is fine."""
    state: dict[int, int] = {}

    def visit(a: int) -> Optional[int]:
        state[a] = 1
        n = s.node(a)
        for c in (n.left, n.right):
            if a in (ROOT, BOT) and c == a:
                continue
            mark = state.get(c)
            if mark == 1:
                return c
            if mark is None:
                hit = visit(c)
                if hit is not None:
                    return hit
        state[a] = 2
        return None

    for start in reach:
        if start not in state:
            hit = visit(start)
            if hit is not None:
                return hit
    return None


def _rule_regular(part: str):
    def rule(s: State, ctx: CheckSuite):
        ok, witness = is_regular(s, ctx.pt2_variant)
        if not ok and witness["part"].startswith(part):
            yield witness

    return rule


STATE_RULES: list[tuple[str, Callable]] = [
    ("key-sentinels", _rule_key_sentinels),
    ("no-self-loop", _rule_no_self_loop),
    ("sentinel-anchors", _rule_sentinel_anchors),
    ("root-pointer-window", _rule_root_pointer_window),
    ("worker-control-frames", _rule_worker_frames),
    ("sys-control-frames", _rule_sys_frames),
    ("removed-focused", _rule_removed_focused),
    ("floating-window", _rule_floating_window),
    ("unreachable-removed-or-locked", _rule_unreachable_owned),
    ("removed-unreachable", _rule_removed_unreachable),
    ("reachable-acyclic", _rule_reachable_acyclic),
    ("regular-sys-anchor", _rule_regular("anchor")),
    ("regular-worker-registers", _rule_regular("registers")),
    ("regular-single-nontree", _rule_regular("shape")),
]


def check_state(state: State, suite: CheckSuite) -> list[Violation]:
    out = []
    for rule, fn in STATE_RULES:
        if not suite.on(rule):
            continue
        for witness in fn(state, suite):
            out.append(Violation(rule, "state", witness, (state,)))
    return out


# -- step rules ---------------------------------------------------------------


def _changed_arcs(pre: State, post: State):
    """(address, side, old, new) for every child slot that changed among
    addresses common to both states."""
    out = []
    for a, n in pre.nodes.items():
        m = post.nodes.get(a)
        if m is None or (n.left == m.left and n.right == m.right):
            continue
        if n.left != m.left:
            out.append((a, "left", n.left, m.left))
        if n.right != m.right:
            out.append((a, "right", n.right, m.right))
    return out


def _rule_immutable_keys(pre, label, post, ctx):
    for a, n in pre.nodes.items():
        m = post.nodes.get(a)
        if m is not None and m.key != n.key:
            yield {"node": a}


def _rule_removal_monotone(pre, label, post, ctx):
    for a, n in pre.nodes.items():
        m = post.nodes.get(a)
        if m is not None and n.removed and not m.removed:
            yield {"node": a}
    for a, m in post.nodes.items():
        if a not in pre.nodes and m.removed:
            yield {"node": a, "why": "born removed"}


def _rule_one_arc_frame(pre, label, post, ctx):
    arcs = _changed_arcs(pre, post)
    if len(arcs) > 1:
        yield {"arcs": tuple((a, side) for a, side, _, _ in arcs)}


def _rule_worker_writes(pre, label, post, ctx):
    if label.pid == SYS:
        return
    w = pre.workers[label.pid]
    for a, side, old, new in _changed_arcs(pre, post):
        ok = (
            label.instr == I3
            and old == BOT
            and a == w.cur
            and not pre.removed(a)
            and new not in pre.nodes
            and post.left(new) == BOT
            and post.right(new) == BOT
        )
        if not ok:
            yield {"node": a, "why": "write outside leaf insertion"}


_DISCONNECTORS = (F8, R8, V6)


def _rule_disconnect_window(pre, label, post, ctx):
    post_reach = post.reachable()
    pre_reach = pre.reachable()
    for a in pre.nodes:
        if a == BOT or a not in pre_reach or a in post_reach:
            continue
        if not (
            a == pre.sysregs.target
            and a == post.sysregs.target
            and label.pid == SYS
            and label.instr in _DISCONNECTORS
        ):
            yield {"node": a, "step": str(label)}


def _rule_removed_children_frozen(pre, label, post, ctx):
    for a, n in pre.nodes.items():
        if not n.removed:
            continue
        m = post.nodes.get(a)
        if m is not None and (m.left != n.left or m.right != n.right):
            yield {"node": a}


def _rule_kconn_stays(pre, label, post, ctx):
    post_reach = post.reachable()
    for k in ctx.key_values():
        pre.search_path(k)
        for a in pre._cache[("kps", k)]:
            if a == BOT or a not in post.nodes:
                continue
            if a in post_reach and not post.k_connected(a, k):
                yield {"node": a, "key": k}


def _rule_disconnected_stays(pre, label, post, ctx):
    pre_reach = pre.reachable()
    post_reach = post.reachable()
    for a in pre.nodes:
        if a not in pre_reach and a in post_reach:
            yield {"node": a}


def _rule_potential_after_k_disconnect(pre, label, post, ctx):
    for k in ctx.key_values():
        pre.search_path(k)
        for a in pre._cache[("kps", k)]:
            if a == BOT or a not in post.nodes or post.k_connected(a, k):
                continue
            if not potential_connectivity(post, a, k, ctx.pt2_variant):
                yield {"node": a, "key": k}
            if pre.key_of(a) == k:
                if not (
                    post.k_connected(post.left(a), k)
                    and post.k_connected(post.right(a), k)
                ):
                    yield {"node": a, "key": k, "why": "children not both on path"}


def _rule_floating_potential_stable(pre, label, post, ctx):
    pre_reach = pre.reachable()
    floating = [a for a in pre.nodes if a not in pre_reach and a != BOT]
    if not floating:
        return
    for k in ctx.key_values():
        for a in floating:
            if a not in post.nodes:
                continue
            if potential_connectivity(pre, a, k, ctx.pt2_variant):
                if not potential_connectivity(post, a, k, ctx.pt2_variant):
                    yield {"node": a, "key": k}


def _rule_floating_child_redirect(pre, label, post, ctx):
    pre_reach = pre.reachable()
    for a, side, old, new in _changed_arcs(pre, post):
        if a in pre_reach:
            continue
        n = post.node(a)
        kept = n.right if side == "left" else n.left
        for k in ctx.key_values():
            if post.k_connected(kept, k) and not post.k_connected(new, k):
                yield {"node": a, "key": k}


def _rule_removal_targets_unreachable(pre, label, post, ctx):
    pre_reach = pre.reachable()
    for a, n in pre.nodes.items():
        if not n.removed and post.nodes[a].removed and a in pre_reach:
            yield {"node": a}


_MUTATORS = {
    "Delete": "deleted",
    "Undelete": "inserted",
    "InsertLeft": "inserted",
    "InsertRight": "inserted",
}


def _rule_set_delta(pre, label, post, ctx):
    from .core import set_delta

    try:
        delta = set_delta(pre, post)
    except ValueError as e:
        yield {"why": str(e)}
        return
    expect = _MUTATORS.get(label.branch) if label.pid != SYS else None
    if expect is None:
        if delta.kind != "unchanged":
            yield {"step": str(label), "delta": f"{delta.kind}({delta.key})"}
    else:
        want_key = pre.workers[label.pid].key.value
        if delta.kind != expect or delta.key != want_key:
            yield {
                "step": str(label),
                "delta": f"{delta.kind}({delta.key})",
                "expected": f"{expect}({want_key})",
            }


# Rules that presuppose a well-formed pre-state.
_NEEDS_REGULAR_PRE = {
    "kconn-stays-unless-disconnected",
    "disconnected-stays-disconnected",
    "potential-after-k-disconnect",
    "floating-potential-stable",
    "floating-child-redirect",
    "removal-targets-unreachable",
    "set-delta-accounting",
}

STEP_RULES: list[tuple[str, Callable]] = [
    ("immutable-keys", _rule_immutable_keys),
    ("removal-monotone", _rule_removal_monotone),
    ("one-arc-frame", _rule_one_arc_frame),
    ("worker-writes-are-leaf-inserts", _rule_worker_writes),
    ("disconnect-window", _rule_disconnect_window),
    ("removed-children-frozen", _rule_removed_children_frozen),
    ("kconn-stays-unless-disconnected", _rule_kconn_stays),
    ("disconnected-stays-disconnected", _rule_disconnected_stays),
    ("potential-after-k-disconnect", _rule_potential_after_k_disconnect),
    ("floating-potential-stable", _rule_floating_potential_stable),
    ("floating-child-redirect", _rule_floating_child_redirect),
    ("removal-targets-unreachable", _rule_removal_targets_unreachable),
    ("set-delta-accounting", _rule_set_delta),
]


def check_step(
    pre: State, label: StepLabel, post: State, suite: CheckSuite
) -> list[Violation]:
    out = []
    regular_pre = None
    for rule, fn in STEP_RULES:
        if not suite.on(rule):
            continue
        if rule in _NEEDS_REGULAR_PRE:
            if regular_pre is None:
                regular_pre = is_regular(pre, suite.pt2_variant)[0]
            if not regular_pre:
                continue
        for witness in fn(pre, label, post, suite):
            out.append(Violation(rule, "step", witness, (pre, post), label))
    return out


ALL_RULES = [r for r, _ in STATE_RULES] + [r for r, _ in STEP_RULES]

"""Memory-state model for the contention-friendly concurrent BST set.

A :class:`State` is a snapshot of the whole shared memory plus every
process's local registers: a node table mapping addresses to records, a
lock table, the registers of each working process, and the registers of
the single maintenance process.  All predicates used by the checker
(reachability, search-path connectivity, the abstract set value) are
defined here so that every other module reads states through one
vocabulary.

States are treated as immutable; the transition function in
:mod:`cfset.semantics` builds new states by copy-on-write.  Derived data
(reachable sets, search paths) is cached per state.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Optional


class Key:
    """A key value: either finite (a natural number) or one of two sentinels.

    The sentinels are distinct objects rather than reserved integers, so no
    finite value can ever alias them.  Total order: ``NEG_INF < fin(n) <
    POS_INF`` with finite keys ordered by their integer value.
    """

    __slots__ = ("rank", "value")

    def __init__(self, rank: int, value: int = 0):
        self.rank = rank  # -1 bottom sentinel, 0 finite, 1 top sentinel
        self.value = value

    def __lt__(self, other: "Key") -> bool:
        return (self.rank, self.value) < (other.rank, other.value)

    def __le__(self, other: "Key") -> bool:
        return (self.rank, self.value) <= (other.rank, other.value)

    def __gt__(self, other: "Key") -> bool:
        return (self.rank, self.value) > (other.rank, other.value)

    def __ge__(self, other: "Key") -> bool:
        return (self.rank, self.value) >= (other.rank, other.value)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Key)
            and self.rank == other.rank
            and self.value == other.value
        )

    def __hash__(self) -> int:
        return hash((self.rank, self.value))

    @property
    def finite(self) -> bool:
        return self.rank == 0

    def __repr__(self) -> str:
        if self.rank < 0:
            return "-inf"
        if self.rank > 0:
            return "+inf"
        return str(self.value)


NEG_INF = Key(-1)
POS_INF = Key(1)

_FIN_CACHE: dict[int, Key] = {}


def fin(n: int) -> Key:
    """The finite key with integer value ``n``."""
    k = _FIN_CACHE.get(n)
    if k is None:
        k = _FIN_CACHE[n] = Key(0, n)
    return k


# Addresses are plain integers; two are distinguished.
ROOT = 0
BOT = 1


class Node(NamedTuple):
    """One address's record: immutable key, two children, two status flags."""

    key: Key
    left: int
    right: int
    deleted: bool
    removed: bool


class Worker(NamedTuple):
    """Registers of a working process: control point, search key, the
    current node ``cur`` and the look-ahead node ``nxt`` of the
    hand-over-hand traversal, and the last returned value."""

    ctrl: str
    key: Key
    cur: int
    nxt: int
    ret: Optional[bool]


class SysRegs(NamedTuple):
    """Registers of the maintenance process.

    ``parent``/``left_side`` identify the edge being restructured and
    ``target`` the node below it.  ``rchild``/``lchild`` are the target's
    children as snapshotted at invocation, ``rl``/``lr`` the grandchild
    snapshots used when cloning, and ``child`` the surviving child during a
    physical removal.
    """

    ctrl: str
    parent: int
    left_side: bool
    target: int
    rchild: int
    lchild: int
    rl: int
    lr: int
    child: int


# Control points.  Workers range over M0/C1/C2/D1/D2/I1/I2/I3; the
# maintenance process over M0/F6..F9/R6..R9/V6..V9.
M0 = "M0"
C1, C2 = "C1", "C2"
D1, D2 = "D1", "D2"
I1, I2, I3 = "I1", "I2", "I3"
F6, F7, F8, F9 = "F6", "F7", "F8", "F9"
R6, R7, R8, R9 = "R6", "R7", "R8", "R9"
V6, V7, V8, V9 = "V6", "V7", "V8", "V9"

SYS = 0  # process id of the maintenance process


class State:
    """One snapshot of shared memory and all process registers."""

    __slots__ = ("nodes", "locks", "workers", "sysregs", "next_addr", "_cache")

    def __init__(
        self,
        nodes: dict[int, Node],
        locks: dict[int, int],
        workers: dict[int, Worker],
        sysregs: SysRegs,
        next_addr: int,
    ):
        self.nodes = nodes
        self.locks = locks
        self.workers = workers
        self.sysregs = sysregs
        self.next_addr = next_addr
        self._cache: dict = {}

    # -- construction ------------------------------------------------

    def replaced(self, **fields) -> "State":
        vals = {
            "nodes": self.nodes,
            "locks": self.locks,
            "workers": self.workers,
            "sysregs": self.sysregs,
            "next_addr": self.next_addr,
        }
        vals.update(fields)
        return State(**vals)

    # -- field access ------------------------------------------------

    def node(self, a: int) -> Node:
        return self.nodes[a]

    def key_of(self, a: int) -> Key:
        return self.nodes[a].key

    def left(self, a: int) -> int:
        return self.nodes[a].left

    def right(self, a: int) -> int:
        return self.nodes[a].right

    def deleted(self, a: int) -> bool:
        return self.nodes[a].deleted

    def removed(self, a: int) -> bool:
        return self.nodes[a].removed

    def lock_holder(self, a: int) -> Optional[int]:
        return self.locks.get(a)

    def child_on(self, a: int, left_side: bool) -> int:
        """The left or right child, selected by a boolean (the LR helper)."""
        n = self.nodes[a]
        return n.left if left_side else n.right

    def points_to(self, x: int, y: int) -> bool:
        """True iff ``y`` is a child of ``x``."""
        n = self.nodes[x]
        return n.left == y or n.right == y

    def k_step(self, x: int, k: Key) -> Optional[int]:
        """The unique successor of ``x`` on a ``k``-search path.

        ``None`` when the search terminates at ``x`` (key match); otherwise
        the left child when ``k`` is below ``x``'s key and the right child
        when above.
        """
        n = self.nodes[x]
        if n.key == k:
            return None
        return n.left if k < n.key else n.right

    # -- derived, cached ----------------------------------------------

    def reachable(self) -> frozenset:
        """Addresses reachable from the root over child pointers."""
        r = self._cache.get("reach")
        if r is None:
            seen = {ROOT}
            stack = [ROOT]
            while stack:
                n = self.nodes[stack.pop()]
                for c in (n.left, n.right):
                    if c not in seen:
                        seen.add(c)
                        stack.append(c)
            r = self._cache["reach"] = frozenset(seen)
        return r

    def path_connected(self, x: int) -> bool:
        return x in self.reachable()

    def search_path(self, k: Key) -> tuple:
        """The unique ``k``-search path from the root, as a tuple of
        addresses.  Stops at a key match or when an address repeats."""
        p = self._cache.get(("kp", k))
        if p is None:
            path = [ROOT]
            seen = {ROOT}
            cur = ROOT
            while True:
                nxt = self.k_step(cur, k)
                if nxt is None or nxt in seen:
                    break
                path.append(nxt)
                seen.add(nxt)
                cur = nxt
            p = self._cache[("kp", k)] = tuple(path)
            self._cache[("kps", k)] = seen
        return p

    def k_connected(self, x: int, k: Key) -> bool:
        """True iff ``x`` lies on the ``k``-search path from the root."""
        self.search_path(k)
        return x in self._cache[("kps", k)]

    def compute_set(self) -> frozenset:
        """The abstract set value: finite keys held by a non-deleted node
        that the key's own search path reaches."""
        s = self._cache.get("set")
        if s is None:
            out = set()
            for a, n in self.nodes.items():
                if n.key.finite and not n.deleted and n.key.value not in out:
                    path = self.search_path(n.key)
                    end = self.nodes[path[-1]]
                    if end.key == n.key and not end.deleted:
                        out.add(n.key.value)
            s = self._cache["set"] = frozenset(out)
        return s


def initial_state(num_workers: int) -> State:
    """The two-node starting structure with every process at M0.

    The root sentinel carries the top key and points to itself on the
    right; the bottom sentinel carries the bottom key and both its children
    are itself.  All registers point at the root.
    """
    if num_workers < 1:
        raise ValueError("need at least one working process")
    nodes = {
        ROOT: Node(POS_INF, BOT, ROOT, False, False),
        BOT: Node(NEG_INF, BOT, BOT, False, False),
    }
    workers = {
        p: Worker(M0, fin(0), ROOT, ROOT, None) for p in range(1, num_workers + 1)
    }
    sysregs = SysRegs(M0, ROOT, True, ROOT, ROOT, ROOT, ROOT, ROOT, ROOT)
    return State(nodes, {}, workers, sysregs, 2)


def compute_set(state: State) -> frozenset:
    """Module-level alias for :meth:`State.compute_set`."""
    return state.compute_set()


class SetDelta(NamedTuple):
    """Difference of the abstract set across one step."""

    kind: str  # "unchanged" | "inserted" | "deleted"
    key: Optional[int]


def set_delta(pre: State, post: State) -> SetDelta:
    """Classify the set change across a step.

    Raises ``ValueError`` when more than one key differs; no legal step can
    do that, so a bigger difference means the caller fed a non-step pair.
    """
    a, b = pre.compute_set(), post.compute_set()
    if a == b:
        return SetDelta("unchanged", None)
    gained, lost = b - a, a - b
    if len(gained) + len(lost) != 1:
        raise ValueError(f"set changed by more than one key: +{gained} -{lost}")
    if gained:
        return SetDelta("inserted", next(iter(gained)))
    return SetDelta("deleted", next(iter(lost)))


def resolve_new(state: State) -> int:
    """The node allocated by an in-flight rotation's clone step, else the root.

    During the tail of a left rotation the clone sits at the snapshot
    pivot's left slot; during a right rotation at the other pivot's right
    slot.  Outside those windows the term defaults to the root.
    """
    ctrl = state.sysregs.ctrl
    if ctrl in (F7, F8, F9):
        return state.left(state.sysregs.rchild)
    if ctrl in (R7, R8, R9):
        return state.right(state.sysregs.lchild)
    return ROOT


def serialize_state(state: State) -> str:
    """Plain textual dump with raw address ids, used in counterexample
    files.  Fields appear in a fixed order so dumps are diffable."""
    lines = []
    for a in sorted(state.nodes):
        n = state.nodes[a]
        lines.append(
            f"node {a} key={n.key} left={n.left} right={n.right} "
            f"del={int(n.deleted)} rem={int(n.removed)}"
        )
    for a in sorted(state.locks):
        lines.append(f"lock {a} holder={state.locks[a]}")
    for p in sorted(state.workers):
        w = state.workers[p]
        ret = "-" if w.ret is None else int(w.ret)
        lines.append(f"proc {p} ctrl={w.ctrl} key={w.key} cur={w.cur} nxt={w.nxt} ret={ret}")
    s = state.sysregs
    lines.append(
        f"sys ctrl={s.ctrl} parent={s.parent} left_side={int(s.left_side)} "
        f"target={s.target} rchild={s.rchild} lchild={s.lchild} "
        f"rl={s.rl} lr={s.lr} child={s.child}"
    )
    return "\n".join(lines)


def iter_addresses(state: State) -> Iterable[int]:
    return state.nodes.keys()

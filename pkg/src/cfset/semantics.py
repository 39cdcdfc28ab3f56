"""Small-step transition relation of the contention-friendly set algorithm.

Every atomic instruction is an enabledness predicate plus a state
transformer.  Transitions are labelled: a :class:`StepLabel` carries the
process, the instruction executed, and the branch taken, which is total
information for deterministic replay.

Lock discipline.  The critical sections are the D2/I2/I3 instructions.
The step that *enters* a critical section (D1->D2, I1->I2, I1->I3)
acquires the per-node lock, so a state whose control point sits at one of
those instructions always holds the lock; a blocked acquisition is simply
a disabled transition.  A worker's locks are all released by the step that
returns it to M0 (backtracking keeps them).  The maintenance process
acquires every lock its invocation prerequisites list (plus the rotation
clone it allocates, whose fields must stay frozen until the final step)
and releases them all when the operation ends.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

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
    Node,
    State,
    Worker,
    fin,
)


class StepLabel(NamedTuple):
    pid: int
    instr: str
    branch: str
    args: tuple = ()

    def __str__(self) -> str:
        parts = [str(self.pid), self.instr, self.branch]
        parts.extend(str(a) for a in self.args)
        return " ".join(parts)


# Operation kinds.
CONTAINS, DELETE, INSERT = "Contains", "Delete", "Insert"
ROTATE_LEFT, ROTATE_RIGHT, REMOVE = "RotateLeft", "RotateRight", "Remove"

WORKER_INVOKE_BRANCHES = {
    CONTAINS: "InvokeContains",
    DELETE: "InvokeDelete",
    INSERT: "InvokeInsert",
}
SYS_INVOKE_BRANCHES = {
    ROTATE_LEFT: "InvokeRotateLeft",
    ROTATE_RIGHT: "InvokeRotateRight",
    REMOVE: "InvokeRemove",
}
INVOKE_TARGET_CTRL = {CONTAINS: C1, DELETE: D1, INSERT: I1}
RETURN_BRANCHES = {
    "ReturnFalse",
    "Return",
    "AlreadyDeleted",
    "Delete",
    "AlreadyPresent",
    "Undelete",
    "InsertLeft",
    "InsertRight",
}


class StepNotEnabled(Exception):
    """Raised when a label is applied in a state that does not enable it."""


def _lock_free_for(state: State, a: int, pid: int) -> bool:
    holder = state.locks.get(a)
    return holder is None or holder == pid


def _acquire(locks: dict, addrs, pid: int) -> dict:
    out = dict(locks)
    for a in addrs:
        out[a] = pid
    return out


def _release_all(locks: dict, pid: int) -> dict:
    return {a: p for a, p in locks.items() if p != pid}


# ---------------------------------------------------------------------------
# Worker transitions
# ---------------------------------------------------------------------------


def worker_invocations(state: State, pid: int, keys) -> list[StepLabel]:
    """All invocation labels available to an idle worker: every operation
    with every key of the configured universe."""
    if state.workers[pid].ctrl != M0:
        return []
    out = []
    for kind in (CONTAINS, DELETE, INSERT):
        for k in keys:
            out.append(StepLabel(pid, M0, WORKER_INVOKE_BRANCHES[kind], (k,)))
    return out


def worker_continuation(state: State, pid: int) -> Optional[StepLabel]:
    """The unique continuation of a mid-operation worker, or ``None`` when
    it is blocked on a lock (or idle at M0)."""
    w = state.workers[pid]
    ctrl = w.ctrl
    if ctrl == M0:
        return None

    if ctrl == C1:
        if w.nxt == BOT:
            return StepLabel(pid, C1, "ReturnFalse")
        if state.key_of(w.nxt) == w.key:
            return StepLabel(pid, C1, "ToC2")
        return StepLabel(pid, C1, "Loop")

    if ctrl == C2:
        return StepLabel(pid, C2, "Return")

    if ctrl == D1:
        if w.nxt == BOT:
            return StepLabel(pid, D1, "ReturnFalse")
        if state.key_of(w.nxt) == w.key:
            if not _lock_free_for(state, w.nxt, pid):
                return None
            return StepLabel(pid, D1, "ToD2")
        return StepLabel(pid, D1, "Loop")

    if ctrl == D2:
        n = state.node(w.cur)
        if n.deleted:
            return StepLabel(pid, D2, "AlreadyDeleted")
        if n.removed:
            return StepLabel(pid, D2, "Backtrack")
        return StepLabel(pid, D2, "Delete")

    if ctrl == I1:
        if w.nxt == BOT:
            if not _lock_free_for(state, w.cur, pid):
                return None
            return StepLabel(pid, I1, "ToI3")
        if state.key_of(w.nxt) == w.key:
            if not _lock_free_for(state, w.nxt, pid):
                return None
            return StepLabel(pid, I1, "ToI2")
        return StepLabel(pid, I1, "Loop")

    if ctrl == I2:
        n = state.node(w.cur)
        if not n.deleted:
            return StepLabel(pid, I2, "AlreadyPresent")
        if n.removed:
            return StepLabel(pid, I2, "Backtrack")
        return StepLabel(pid, I2, "Undelete")

    if ctrl == I3:
        slot = state.k_step(w.cur, w.key)
        if slot != BOT:
            return StepLabel(pid, I3, "Retry")
        if w.key < state.key_of(w.cur):
            return StepLabel(pid, I3, "InsertLeft")
        return StepLabel(pid, I3, "InsertRight")

    raise AssertionError(f"unknown worker control point {ctrl}")


def _apply_worker(state: State, label: StepLabel) -> State:
    pid, instr, branch = label.pid, label.instr, label.branch
    w = state.workers[pid]

    def upd(worker: Worker, locks=None, nodes=None) -> State:
        workers = dict(state.workers)
        workers[pid] = worker
        return state.replaced(
            workers=workers,
            locks=state.locks if locks is None else locks,
            nodes=state.nodes if nodes is None else nodes,
        )

    if instr == M0:
        kind = next(k for k, b in WORKER_INVOKE_BRANCHES.items() if b == branch)
        key = fin(label.args[0]) if not isinstance(label.args[0], Key) else label.args[0]
        return upd(Worker(INVOKE_TARGET_CTRL[kind], key, ROOT, ROOT, None))

    if instr in (C1, D1, I1):
        to_cs = {C1: C2, D1: D2, I1: I2}[instr]
        loop = instr
        if branch == "ReturnFalse":
            return upd(
                w._replace(ctrl=M0, ret=False), locks=_release_all(state.locks, pid)
            )
        if branch == "ToI3":
            return upd(
                w._replace(ctrl=I3), locks=_acquire(state.locks, [w.cur], pid)
            )
        if branch in ("ToC2", "ToD2", "ToI2"):
            locks = state.locks
            if instr != C1:  # contains never locks
                locks = _acquire(state.locks, [w.nxt], pid)
            return upd(w._replace(ctrl=to_cs, cur=w.nxt), locks=locks)
        if branch == "Loop":
            cur = w.nxt
            nxt = state.k_step(cur, w.key)
            return upd(w._replace(ctrl=loop, cur=cur, nxt=nxt))

    if instr == C2:
        return upd(
            w._replace(ctrl=M0, ret=not state.deleted(w.cur)),
            locks=_release_all(state.locks, pid),
        )

    if instr in (D2, I2):
        back_to = D1 if instr == D2 else I1
        if branch in ("AlreadyDeleted", "AlreadyPresent"):
            return upd(
                w._replace(ctrl=M0, ret=False), locks=_release_all(state.locks, pid)
            )
        if branch == "Backtrack":
            return upd(w._replace(ctrl=back_to, nxt=state.right(w.cur)))
        nodes = dict(state.nodes)
        n = nodes[w.cur]
        nodes[w.cur] = n._replace(deleted=(branch == "Delete"))
        return upd(
            w._replace(ctrl=M0, ret=True),
            locks=_release_all(state.locks, pid),
            nodes=nodes,
        )

    if instr == I3:
        if branch == "Retry":
            return upd(w._replace(ctrl=I1, nxt=state.k_step(w.cur, w.key)))
        new_addr = state.next_addr
        nodes = dict(state.nodes)
        nodes[new_addr] = Node(w.key, BOT, BOT, False, False)
        n = nodes[w.cur]
        if branch == "InsertLeft":
            nodes[w.cur] = n._replace(left=new_addr)
        else:
            nodes[w.cur] = n._replace(right=new_addr)
        workers = dict(state.workers)
        workers[pid] = w._replace(ctrl=M0, ret=True)
        return State(
            nodes,
            _release_all(state.locks, pid),
            workers,
            state.sysregs,
            new_addr + 1,
        )

    raise AssertionError(f"cannot apply {label}")


# ---------------------------------------------------------------------------
# Maintenance-process transitions
# ---------------------------------------------------------------------------


def sys_invocation_label(kind: str, parent: int, left_side: bool) -> StepLabel:
    return StepLabel(SYS, M0, SYS_INVOKE_BRANCHES[kind], (parent, left_side))


def invoke_sys(state: State, kind: str, parent: int, left_side: bool) -> Optional[State]:
    """Attempt a maintenance invocation; ``None`` when a prerequisite fails
    or a required lock is held, which is a disabled transition, not a fault.

    On success all prerequisite snapshot registers are assigned, the listed
    locks acquired atomically, and control moves to the operation's first
    restructuring step.
    """
    if state.sysregs.ctrl != M0:
        return None
    if parent not in state.nodes:
        return None
    # Common prerequisites: parent exists, is not the bottom sentinel, is
    # not removed; the selected child is a real unremoved interior node.
    if parent == BOT or state.removed(parent):
        return None
    target = state.child_on(parent, left_side)
    if target in (ROOT, BOT, parent) or state.removed(target):
        return None

    regs = state.sysregs
    if kind == ROTATE_LEFT:
        rchild = state.right(target)
        if rchild == BOT or state.removed(rchild):
            return None
        need = [parent, target, rchild]
        if not all(_lock_free_for(state, a, SYS) for a in need):
            return None
        regs = regs._replace(
            ctrl=F6,
            parent=parent,
            left_side=left_side,
            target=target,
            rchild=rchild,
            rl=state.left(rchild),
            lchild=state.left(target),
        )
    elif kind == ROTATE_RIGHT:
        lchild = state.left(target)
        if lchild == BOT or state.removed(lchild):
            return None
        need = [parent, target, lchild]
        if not all(_lock_free_for(state, a, SYS) for a in need):
            return None
        regs = regs._replace(
            ctrl=R6,
            parent=parent,
            left_side=left_side,
            target=target,
            lchild=lchild,
            lr=state.right(lchild),
            rchild=state.right(target),
        )
    elif kind == REMOVE:
        need = [parent, target]
        if not all(_lock_free_for(state, a, SYS) for a in need):
            return None
        n = state.node(target)
        if not n.deleted or (n.left != BOT and n.right != BOT):
            return None
        child = n.left if n.left != BOT else n.right
        regs = regs._replace(
            ctrl=V6, parent=parent, left_side=left_side, target=target, child=child
        )
    else:
        raise ValueError(f"unknown maintenance operation {kind}")

    return state.replaced(sysregs=regs, locks=_acquire(state.locks, need, SYS))


def sys_invocations(state: State) -> list[StepLabel]:
    """Every enabled maintenance invocation over current addresses."""
    if state.sysregs.ctrl != M0:
        return []
    out = []
    for kind in (ROTATE_LEFT, ROTATE_RIGHT, REMOVE):
        for parent in sorted(state.nodes):
            for left_side in (True, False):
                if invoke_sys(state, kind, parent, left_side) is not None:
                    out.append(sys_invocation_label(kind, parent, left_side))
    return out


def sys_continuation(state: State) -> Optional[StepLabel]:
    ctrl = state.sysregs.ctrl
    if ctrl == M0:
        return None
    return StepLabel(SYS, ctrl, ctrl)


def _apply_sys(state: State, label: StepLabel) -> State:
    instr = label.instr
    regs = state.sysregs

    if instr == M0:
        kind = next(k for k, b in SYS_INVOKE_BRANCHES.items() if b == label.branch)
        parent, left_side = label.args
        post = invoke_sys(state, kind, parent, left_side)
        if post is None:
            raise StepNotEnabled(f"prerequisites fail for {label}")
        return post

    nodes = dict(state.nodes)
    locks = state.locks

    def set_child(a: int, left_side: bool, c: int) -> None:
        n = nodes[a]
        nodes[a] = n._replace(left=c) if left_side else n._replace(right=c)

    if instr in (F6, R6):
        # Allocate the clone of the target and hang it off the pivot in one
        # step; the clone stays locked until the rotation ends so its
        # fields are unreachable for workers until then.
        new_addr = state.next_addr
        tgt = nodes[regs.target]
        if instr == F6:
            nodes[new_addr] = Node(tgt.key, regs.lchild, regs.rl, tgt.deleted, False)
            set_child(regs.rchild, True, new_addr)
            nxt_ctrl = F7
        else:
            nodes[new_addr] = Node(tgt.key, regs.lr, regs.rchild, tgt.deleted, False)
            set_child(regs.lchild, False, new_addr)
            nxt_ctrl = R7
        locks = _acquire(locks, [new_addr], SYS)
        return State(
            nodes, locks, state.workers, regs._replace(ctrl=nxt_ctrl), new_addr + 1
        )

    if instr == F7:
        set_child(regs.target, True, regs.rchild)
        regs = regs._replace(ctrl=F8)
    elif instr == R7:
        set_child(regs.target, False, regs.lchild)
        regs = regs._replace(ctrl=R8)
    elif instr == F8:
        set_child(regs.parent, regs.left_side, regs.rchild)
        regs = regs._replace(ctrl=F9)
    elif instr == R8:
        set_child(regs.parent, regs.left_side, regs.lchild)
        regs = regs._replace(ctrl=R9)
    elif instr == V6:
        set_child(regs.parent, regs.left_side, regs.child)
        regs = regs._replace(ctrl=V7)
    elif instr == V7:
        if nodes[regs.target].left == BOT:
            set_child(regs.target, True, regs.parent)
        else:
            set_child(regs.target, False, regs.parent)
        regs = regs._replace(ctrl=V8)
    elif instr == V8:
        if nodes[regs.target].left == regs.parent:
            set_child(regs.target, False, regs.parent)
        else:
            set_child(regs.target, True, regs.parent)
        regs = regs._replace(ctrl=V9)
    elif instr in (F9, R9, V9):
        n = nodes[regs.target]
        nodes[regs.target] = n._replace(removed=True)
        locks = _release_all(locks, SYS)
        regs = regs._replace(ctrl=M0)
    else:
        raise AssertionError(f"cannot apply {label}")

    return State(nodes, locks, state.workers, regs, state.next_addr)


# ---------------------------------------------------------------------------
# The relation
# ---------------------------------------------------------------------------


def enabled_steps(state: State, keys) -> list[StepLabel]:
    """Every enabled label: per mid-operation process its unique
    continuation, per idle worker one invocation per (operation, key), and
    every maintenance invocation whose prerequisites and locks admit it.

    ``keys`` is the configured finite key universe (integers).
    """
    out: list[StepLabel] = []
    if state.sysregs.ctrl == M0:
        out.extend(sys_invocations(state))
    else:
        out.append(sys_continuation(state))
    for pid in sorted(state.workers):
        w = state.workers[pid]
        if w.ctrl == M0:
            out.extend(worker_invocations(state, pid, keys))
        else:
            cont = worker_continuation(state, pid)
            if cont is not None:
                out.append(cont)
    return out


def _explain_block(state: State, label: StepLabel) -> str:
    pid = label.pid
    if pid != SYS:
        w = state.workers[pid]
        if w.ctrl != label.instr:
            return f"process {pid} is at {w.ctrl}, not {label.instr}"
        want = worker_continuation(state, pid)
        if want is None:
            node = w.nxt if label.instr in (D1,) or label.branch == "ToI2" else w.cur
            holder = state.locks.get(node)
            return f"lock on node {node} held by process {holder}"
        return f"state enables branch {want.branch}, not {label.branch}"
    if state.sysregs.ctrl != label.instr:
        return f"maintenance process is at {state.sysregs.ctrl}, not {label.instr}"
    return f"prerequisites fail for {label}"


def apply_step(state: State, label: StepLabel, check: bool = True) -> State:
    """Apply one labelled step.

    With ``check`` set (the default, used by replay) the label must be
    exactly the step the state enables for that process; a mismatch raises
    :class:`StepNotEnabled` naming the failed condition.
    """
    if label.pid == SYS:
        if check and label.instr != M0:
            want = sys_continuation(state)
            if want != label:
                raise StepNotEnabled(_explain_block(state, label))
        return _apply_sys(state, label)

    if check:
        w = state.workers.get(label.pid)
        if w is None:
            raise StepNotEnabled(f"no such process {label.pid}")
        if label.instr == M0:
            if w.ctrl != M0:
                raise StepNotEnabled(f"process {label.pid} is mid-operation at {w.ctrl}")
        else:
            want = worker_continuation(state, label.pid)
            if want is None or (want.instr, want.branch) != (label.instr, label.branch):
                raise StepNotEnabled(_explain_block(state, label))
    return _apply_worker(state, label)


def is_return_step(label: StepLabel) -> bool:
    return label.pid != SYS and label.branch in RETURN_BRANCHES


def is_worker_invoke(label: StepLabel) -> bool:
    return label.pid != SYS and label.instr == M0


def invoked_kind(label: StepLabel) -> str:
    return next(k for k, b in WORKER_INVOKE_BRANCHES.items() if b == label.branch)

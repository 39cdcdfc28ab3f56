"""cfset: an executable model, explicit-state checker, linearizability
analyzer, and concurrent runtime for a contention-friendly BST set."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    BOT,
    NEG_INF,
    POS_INF,
    ROOT,
    SYS,
    Key,
    Node,
    State,
    compute_set,
    fin,
    initial_state,
    resolve_new,
    set_delta,
)
from .semantics import StepLabel, apply_step, enabled_steps, invoke_sys  # noqa: F401
from .explorer import (  # noqa: F401
    ExploreConfig,
    Trace,
    canonical_digest,
    explore,
    random_walk,
    replay,
    replay_script,
)
from .checker import (  # noqa: F401
    CheckSuite,
    check_state,
    check_step,
    is_confluent,
    is_focused,
    is_pre_removed,
    is_regular,
    is_tree_like,
    potential_connectivity,
)
from .linearize import (  # noqa: F401
    assign_linearizations,
    brute_force_linearizable,
    carve_operations,
    extract_kscan,
    scanning_witness,
    validate_kscan,
)
from .runtime import (  # noqa: F401
    ConcurrentSetHandle,
    StressConfig,
    maintenance_pass,
    set_contains,
    set_delete,
    set_insert,
    stress,
)

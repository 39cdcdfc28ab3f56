"""Command-line front end.

Subcommands: ``explore`` (bounded exhaustive search plus full checking),
``replay`` (deterministic script replay with a per-state summary),
``walk`` (seeded random walks with checking and linearization),
``stress`` (concurrent runtime torture with offline history checking) and
``report`` (figures and tables for a recorded run).

Exit codes: 0 clean, 1 property violation, 2 usage error, 3 internal
fault.  Every run writes one JSON manifest echoing the full configuration;
all randomness flows from ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .checker import is_regular
from .core import serialize_state
from .explorer import (
    ExploreConfig,
    Trace,
    digest_hex,
    explore,
    random_walk,
    replay_script,
    serialize_labels,
)
from .linearize import assign_linearizations, carve_operations
from .runtime import StressConfig, stress
from .semantics import StepNotEnabled

log = logging.getLogger("cfset")


def _setup_logging() -> None:
    level = os.environ.get("CFSET_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _write_manifest(out_dir: Path, command: str, config: dict, outcome: dict,
                    artifacts: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "version": __version__,
        "config": {k: v for k, v in config.items() if k != "fn"},
        "outcome": outcome,
        "artifacts": artifacts,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _parse_keys(text: str) -> tuple:
    return tuple(int(k) for k in text.split(",") if k)


def cmd_explore(args) -> int:
    config = ExploreConfig(
        num_workers=args.workers,
        keys=_parse_keys(args.keys),
        ops_per_worker=args.ops,
        sys_budget=args.sys_budget,
        depth_limit=args.depth,
        pt2_variant=args.pt2,
        max_states=args.max_states,
    )
    report = explore(config)
    out_dir = Path(args.out)
    artifacts = {}
    for i, (violation, path) in enumerate(
        zip(report.violations, report.violation_scripts)
    ):
        name = f"counterexample-{i:03d}.script"
        script = serialize_labels(path, config.num_workers)
        body = [
            f"# violated rule: {violation.rule} ({violation.kind})",
            f"# witness: {violation.describe()}",
        ]
        for s in violation.states:
            body.append("# state " + digest_hex(s))
            body.extend("#   " + line for line in serialize_state(s).splitlines())
        (out_dir / name).parent.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_text("\n".join(body) + "\n" + script)
        artifacts[f"counterexample_{i}"] = name
        print(f"violation: {violation.describe()}  -> {name}")
    outcome = {
        "states_visited": report.states_visited,
        "transitions": report.transitions,
        "violations": len(report.violations),
        "fully_blocked": report.fully_blocked,
        "frontier_truncated": report.frontier_truncated,
        "depth_profile": report.depth_profile,
    }
    _write_manifest(out_dir, "explore", vars(args), outcome, artifacts)
    print(
        f"explored {report.states_visited} states, {report.transitions} transitions, "
        f"{len(report.violations)} violations"
    )
    return 0 if report.ok else 1


def _state_summary(trace: Trace, index: int) -> str:
    state = trace.state(index)
    live = sorted(state.compute_set())
    regular, _ = is_regular(state)
    extras = []
    from .checker import is_confluent, is_tree_like

    for a in sorted(state.reachable()):
        if is_confluent(state, a):
            extras.append(f"confluent={state.key_of(a)}")
        if a not in (0, 1) and not is_tree_like(state, a):
            extras.append(f"non-tree-like={state.key_of(a)}")
    tail = (" " + " ".join(extras)) if extras else ""
    return f"[{index:3d}] set={{{','.join(map(str, live))}}} regular={regular}{tail}"


def cmd_replay(args) -> int:
    text = Path(args.script).read_text()
    suite_keys = _parse_keys(args.keys) if args.keys else ()
    from .checker import CheckSuite

    suite = CheckSuite(suite_keys, args.pt2)
    try:
        trace, violations = replay_script(text, args.workers, suite)
    except StepNotEnabled as e:
        print(f"replay failed: {e}", file=sys.stderr)
        return 1
    print(_state_summary(trace, 0))
    for i in range(1, len(trace) + 1):
        label = trace.labels[i - 1]
        print(f"  step {label}")
        print(_state_summary(trace, i))
    for v in violations:
        print(f"violation: {v.describe()}")
    return 1 if violations else 0


def cmd_walk(args) -> int:
    config = ExploreConfig(
        num_workers=args.workers,
        keys=_parse_keys(args.keys),
        ops_per_worker=args.ops,
        sys_budget=args.sys_budget,
        pt2_variant=args.pt2,
        seed=args.seed,
        walks=args.walks,
        walk_length=args.len,
    )
    traces, violations = random_walk(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lin_failures = 0
    complete = 0
    lin_lines = []
    for i, trace in enumerate(traces):
        (out_dir / f"walk-{i:04d}.trace").write_text(
            f"# workers={args.workers} keys={args.keys} seed={args.seed} walk={i}\n"
            + serialize_labels(trace.labels, config.num_workers)
        )
        if all(e.complete for e in carve_operations(trace)):
            complete += 1
            result = assign_linearizations(trace)
            if not result.ok:
                lin_failures += 1
                for op, why in result.failures:
                    lin_lines.append(f"walk {i} FAILED {op} {why}")
                continue
            ordered = sorted(result.assignments, key=lambda a: (a.lin_index, a.mutating))
            for a in ordered:
                op = a.op
                lin_lines.append(
                    f"walk {i} pid {op.pid} {op.kind} {op.key} "
                    f"inv {op.invoke_index} res {op.response_index} "
                    f"lin {a.lin_index} {a.tag} -> {op.return_val}"
                )
            history = " ".join(
                f"{a.op.kind}({a.op.key})={int(a.op.return_val)}" for a in ordered
            )
            lin_lines.append(f"walk {i} sequential: {history or '(empty)'}")
    (out_dir / "linearizations.log").write_text("\n".join(lin_lines) + "\n")
    outcome = {
        "walks": len(traces),
        "complete": complete,
        "violations": len(violations),
        "linearization_failures": lin_failures,
        "depth_profile": [],
        "states_visited": sum(len(t) + 1 for t in traces),
        "transitions": sum(len(t) for t in traces),
    }
    _write_manifest(
        out_dir, "walk", vars(args), outcome, {"linearizations": "linearizations.log"}
    )
    for v in violations[:20]:
        print(f"violation: {v.describe()}")
    print(
        f"{len(traces)} walks ({complete} complete), {len(violations)} violations, "
        f"{lin_failures} linearization failures"
    )
    return 0 if not violations and not lin_failures else 1


def cmd_stress(args) -> int:
    config = StressConfig(
        threads=args.threads,
        ops_per_thread=args.ops,
        keys=args.keys,
        maintenance=args.maintenance == "on",
        seed=args.seed,
    )
    try:
        outcome = stress(config)
    except Exception as e:  # thread fault: dump what we have
        print(f"internal fault: {e}", file=sys.stderr)
        return 3
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    history_path = out_dir / "history.log"
    history_path.write_text(outcome.log.dump())
    _write_manifest(
        out_dir,
        "stress",
        vars(args),
        {
            "passed": outcome.passed,
            "operations": outcome.ops,
            "final_set": sorted(outcome.final_set),
            "backtracks": outcome.backtracks,
            "retries": outcome.retries,
            "problems": outcome.problems,
        },
        {"history": "history.log"},
    )
    for p in outcome.problems:
        print(f"problem: {p}")
    print(f"stress: {outcome.ops} operations, verdict {'pass' if outcome.passed else 'FAIL'}")
    return 0 if outcome.passed else 1


def cmd_report(args) -> int:
    from .report import render

    written = render(Path(args.manifest), Path(args.out))
    for p in written:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfset", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("explore", help="bounded exhaustive state search")
    ex.add_argument("--workers", type=int, default=2)
    ex.add_argument("--keys", default="1,2,3", help="comma-separated key universe")
    ex.add_argument("--ops", type=int, default=2, help="operations per worker")
    ex.add_argument("--sys-budget", type=int, default=2)
    ex.add_argument("--depth", type=int, default=12)
    ex.add_argument("--pt2", choices=["corrected", "original"], default="corrected")
    ex.add_argument("--max-states", type=int, default=5_000_000)
    ex.add_argument("--out", default="cfset-out")
    ex.set_defaults(fn=cmd_explore)

    rp = sub.add_parser("replay", help="replay a recorded script")
    rp.add_argument("--script", required=True)
    rp.add_argument("--workers", type=int, default=2)
    rp.add_argument("--keys", default="", help="key universe for step checks")
    rp.add_argument("--pt2", choices=["corrected", "original"], default="corrected")
    rp.set_defaults(fn=cmd_replay)

    wk = sub.add_parser("walk", help="seeded random walks")
    wk.add_argument("--seed", type=int, default=0)
    wk.add_argument("--walks", type=int, default=100)
    wk.add_argument("--len", type=int, default=40)
    wk.add_argument("--workers", type=int, default=2)
    wk.add_argument("--keys", default="1,2,3")
    wk.add_argument("--ops", type=int, default=2)
    wk.add_argument("--sys-budget", type=int, default=2)
    wk.add_argument("--pt2", choices=["corrected", "original"], default="corrected")
    wk.add_argument("--out", default="cfset-out")
    wk.set_defaults(fn=cmd_walk)

    st = sub.add_parser("stress", help="concurrent runtime stress")
    st.add_argument("--threads", type=int, default=4)
    st.add_argument("--ops", type=int, default=200)
    st.add_argument("--keys", type=int, default=8)
    st.add_argument("--seed", type=int, default=7)
    st.add_argument("--maintenance", choices=["on", "off"], default="on")
    st.add_argument("--out", default="cfset-out")
    st.set_defaults(fn=cmd_stress)

    rep = sub.add_parser("report", help="render figures for a recorded run")
    rep.add_argument("--manifest", required=True)
    rep.add_argument("--out", default="cfset-report")
    rep.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except StepNotEnabled as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

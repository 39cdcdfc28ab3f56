"""Figure and table rendering for run artifacts.

Given a run manifest this writes delimited summaries (CSV) and matplotlib
figures (PNG) next to them: the per-depth state profile of an exploration,
or the per-thread operation mix and outcome counts of a stress history.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def render_exploration(manifest: dict, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    profile = manifest["outcome"].get("depth_profile", [])
    written = []

    csv_path = out_dir / "depth_profile.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["depth", "states"])
        for d, n in enumerate(profile):
            w.writerow([d, n])
    written.append(csv_path)

    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(range(len(profile)), profile, color="#4878a8")
    ax.set_xlabel("depth")
    ax.set_ylabel("new states")
    ax.set_title(
        f"{manifest['outcome'].get('states_visited', 0)} states, "
        f"{manifest['outcome'].get('transitions', 0)} transitions, "
        f"{manifest['outcome'].get('violations', 0)} violations"
    )
    fig.tight_layout()
    png_path = out_dir / "depth_profile.png"
    fig.savefig(png_path, dpi=130)
    plt.close(fig)
    written.append(png_path)
    return written


def render_stress(manifest: dict, history_path: Path, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    per_thread: dict[str, dict] = {}
    for line in history_path.read_text().splitlines():
        parts = line.split()
        if len(parts) < 5 or parts[2] != "Respond":
            continue
        tid, kind, result = parts[1], parts[3], parts[5] if len(parts) > 5 else "?"
        slot = per_thread.setdefault(tid, {})
        key = f"{kind}/{result}"
        slot[key] = slot.get(key, 0) + 1

    csv_path = out_dir / "stress_summary.csv"
    kinds = sorted({k for slot in per_thread.values() for k in slot})
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["thread"] + kinds)
        for tid in sorted(per_thread, key=int):
            w.writerow([tid] + [per_thread[tid].get(k, 0) for k in kinds])
    written.append(csv_path)

    fig, ax = plt.subplots(figsize=(6.5, 3.2))
    threads = sorted(per_thread, key=int)
    bottoms = [0] * len(threads)
    for kind in kinds:
        vals = [per_thread[t].get(kind, 0) for t in threads]
        ax.bar(threads, vals, bottom=bottoms, label=kind)
        bottoms = [b + v for b, v in zip(bottoms, vals)]
    ax.set_xlabel("thread")
    ax.set_ylabel("completed operations")
    verdict = "pass" if manifest["outcome"].get("passed") else "FAIL"
    ax.set_title(f"stress outcome: {verdict}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    png_path = out_dir / "stress_ops.png"
    fig.savefig(png_path, dpi=130)
    plt.close(fig)
    written.append(png_path)
    return written


def render(manifest_path: Path, out_dir: Path) -> list[Path]:
    manifest = json.loads(manifest_path.read_text())
    if manifest["command"] in ("explore", "walk"):
        return render_exploration(manifest, out_dir)
    if manifest["command"] == "stress":
        history = Path(manifest["artifacts"]["history"])
        if not history.is_absolute():
            history = manifest_path.parent / history
        return render_stress(manifest, history, out_dir)
    raise ValueError(f"no report renderer for {manifest['command']!r} runs")

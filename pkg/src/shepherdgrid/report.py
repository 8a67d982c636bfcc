"""Figure rendering for emitted result files.

Each render_* function reads the delimited output of a finished run from its
directory and writes PNG figures alongside it. Rendering is a presentation
layer only: nothing here feeds back into results.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

DPI = 150


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def render_batch(out_dir: Path) -> list[Path]:
    """Cumulative capture curve and TTI histogram from curve.csv / tti.csv."""
    out_dir = Path(out_dir)
    written = []

    rows = _read_csv(out_dir / "curve.csv")
    ts = [float(r["t"]) for r in rows]
    fr = [float(r["fraction"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ts, fr)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("fraction of targets captured")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    title = "Cumulative capture"
    summary_path = out_dir / "summary.json"
    if summary_path.exists():
        with open(summary_path) as fh:
            summary = json.load(fh)
        title += f" ({summary.get('strategy', '?')}, success {summary.get('success_rate')})"
    ax.set_title(title)
    path = out_dir / "curve.png"
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    tti_rows = _read_csv(out_dir / "tti.csv")
    times = [float(r["capture_time"]) for r in tti_rows]
    if times:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(times, bins=30)
        ax.set_xlabel("time to intercept (s)")
        ax.set_ylabel("captures")
        ax.set_title("Time-to-intercept distribution")
        ax.grid(True, alpha=0.3)
        path = out_dir / "tti.png"
        fig.savefig(path, dpi=DPI, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written


def render_sweep(out_dir: Path, xlabel: str = "level") -> list[Path]:
    """Per-strategy success-vs-level curves with CIs from sweep.csv."""
    out_dir = Path(out_dir)
    rows = _read_csv(out_dir / "sweep.csv")
    fig, ax = plt.subplots(figsize=(6, 4))
    for strategy in sorted({r["strategy"] for r in rows}):
        sub = [r for r in rows if r["strategy"] == strategy]
        xs = [float(r["level"]) for r in sub]
        ys = [float(r["success"]) for r in sub]
        lo = [float(r["ci_lo"]) for r in sub]
        hi = [float(r["ci_hi"]) for r in sub]
        ax.plot(xs, ys, marker="o", label=strategy)
        ax.fill_between(xs, lo, hi, alpha=0.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("success rate")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    ax.grid(True, alpha=0.3)
    ax.set_title("Success rate by condition")
    path = out_dir / "sweep.png"
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return [path]


def render_coverage(out_dir: Path) -> list[Path]:
    """Escape bound vs horizon with the containment boundary, from coverage.csv."""
    out_dir = Path(out_dir)
    rows = _read_csv(out_dir / "coverage.csv")
    dts = [float(r["dt"]) for r in rows]
    bounds = [float(r["escape_prob_bound"]) for r in rows]
    holds = [r["condition_holds"] == "1" for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(dts, bounds, marker="o", label="escape bound")
    flips = [dt for dt, h in zip(dts, holds) if not h]
    if flips and any(holds):
        ax.axvline(min(flips), linestyle="--", color="gray",
                   label="containment boundary")
    ax.set_xlabel("horizon (s)")
    ax.set_ylabel("per-step escape bound")
    ax.legend()
    ax.grid(True, alpha=0.3)
    ax.set_title("Formation containment vs horizon")
    path = out_dir / "coverage.png"
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return [path]


def render_timeline(out_dir: Path, max_trials: int = 10) -> list[Path]:
    """Phase Gantt bars for the first few trials, from timeline.csv."""
    out_dir = Path(out_dir)
    rows = _read_csv(out_dir / "timeline.csv")
    colors = {"chase": "tab:blue", "follow": "tab:orange",
              "form": "tab:green", "engage": "tab:red"}
    lanes = sorted({(int(r["trial"]), int(r["pack"])) for r in rows
                    if int(r["trial"]) < max_trials})
    lane_of = {key: i for i, key in enumerate(lanes)}
    fig, ax = plt.subplots(figsize=(8, max(3, 0.3 * len(lanes))))
    for r in rows:
        key = (int(r["trial"]), int(r["pack"]))
        if key not in lane_of:
            continue
        start, end = float(r["start"]), float(r["end"])
        ax.barh(lane_of[key], end - start, left=start, height=0.6,
                color=colors.get(r["phase"], "gray"))
    ax.set_yticks(range(len(lanes)))
    ax.set_yticklabels([f"t{t}/p{p}" for t, p in lanes], fontsize=6)
    ax.set_xlabel("time (s)")
    ax.set_title("Pack phase timelines")
    handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in colors.values()]
    ax.legend(handles, list(colors), loc="upper right", fontsize=7)
    path = out_dir / "timeline.png"
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return [path]

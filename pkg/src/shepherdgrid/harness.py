"""Batch Monte Carlo experiment runner and statistics.

Reproduces the four experiment families (single-condition batches,
packet-loss sweeps, target-count sweeps, phase timelines) and emits
machine-readable results: summary.json, curve.csv, tti.csv, sweep.csv,
timeline.csv. Floats are serialized with 9 significant digits.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .engine import Scenario, TrialResult, run_trial

Z95 = 1.959963984540054

DEFAULT_LOSS_LEVELS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
DEFAULT_TARGET_LEVELS = (1, 2, 4, 8, 12, 16, 20)
CURVE_STEP = 1.0  # s


@dataclass(frozen=True)
class BatchConfig:
    scenario: Scenario
    n_trials: int = 100
    seed_base: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")


@dataclass
class BatchStats:
    n_trials: int
    n_targets_total: int
    n_captures: int
    success_rate: float
    ci_lo: float
    ci_hi: float
    tti_q25: float | None
    tti_median: float | None
    tti_q75: float | None
    mean_pack_energy: float
    curve: list[float] = field(default_factory=list)  # 1 s grid from t=0
    capture_times: list[tuple[int, float]] = field(default_factory=list)


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # The bounds hit 0/1 exactly at degenerate rates; avoid rounding residue.
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return lo, hi


def quantile_linear(sorted_values: list[float], q: float) -> float:
    """Linear-interpolation quantile over pre-sorted values (q in [0, 1])."""
    if not sorted_values:
        raise ValueError("quantile of empty sequence")
    n = len(sorted_values)
    if n == 1:
        return sorted_values[0]
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    # lo + frac * (hi - lo) stays inside [lo, hi] even when both are equal;
    # the weighted-average form can overshoot by an ulp.
    return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo])


def tti_stats(capture_times: list[float]) -> tuple[float, float, float] | None:
    """(q25, median, q75) over captured trials; None when nothing was captured."""
    if not capture_times:
        return None
    xs = sorted(capture_times)
    return (quantile_linear(xs, 0.25), quantile_linear(xs, 0.5),
            quantile_linear(xs, 0.75))


def cumulative_curve(capture_times: list[float], n_units: int,
                     horizon: float = 300.0, step: float = CURVE_STEP) -> list[float]:
    """Fraction of units captured by each grid time (0, step, ..., horizon)."""
    xs = sorted(capture_times)
    curve = []
    i = 0
    n_grid = int(round(horizon / step)) + 1
    for g in range(n_grid):
        t = g * step
        while i < len(xs) and xs[i] <= t:
            i += 1
        curve.append(i / n_units if n_units else 0.0)
    return curve


def run_batch(cfg: BatchConfig) -> list[TrialResult]:
    """Run n_trials with seeds seed_base + index; deterministic given cfg."""
    results = []
    for i in range(cfg.n_trials):
        sc = replace(cfg.scenario, seed=cfg.seed_base + i)
        results.append(run_trial(sc))
    return results


def batch_stats(results: list[TrialResult], horizon: float = 300.0) -> BatchStats:
    n_trials = len(results)
    capture_times = []
    all_times = []
    n_targets_total = 0
    n_captures = 0
    total_energy = 0.0
    for trial_idx, r in enumerate(results):
        n_targets_total += len(r.outcomes)
        for o in r.outcomes:
            if o.captured:
                n_captures += 1
                all_times.append(o.capture_time)
                capture_times.append((trial_idx, o.capture_time))
        total_energy += sum(r.energy)
    success = n_captures / n_targets_total if n_targets_total else 0.0
    ci_lo, ci_hi = wilson_interval(n_captures, n_targets_total)
    tti = tti_stats(all_times)
    return BatchStats(
        n_trials=n_trials,
        n_targets_total=n_targets_total,
        n_captures=n_captures,
        success_rate=success,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        tti_q25=tti[0] if tti else None,
        tti_median=tti[1] if tti else None,
        tti_q75=tti[2] if tti else None,
        mean_pack_energy=total_energy / n_trials if n_trials else 0.0,
        curve=cumulative_curve(all_times, n_targets_total, horizon),
        capture_times=capture_times,
    )


def sweep_packet_loss(scenario: Scenario, n_trials: int = 100, seed_base: int = 1,
                      levels: tuple = DEFAULT_LOSS_LEVELS,
                      strategies: tuple = ("shepherd", "traditional")) -> list[dict]:
    """Per-(strategy, loss level) success table for the degradation experiment."""
    rows = []
    for strategy in strategies:
        for level in levels:
            sc = replace(scenario, strategy=strategy, loss_prob=level)
            stats = batch_stats(run_batch(BatchConfig(sc, n_trials, seed_base)),
                                scenario.max_duration)
            rows.append({"level": level, "strategy": strategy,
                         "success": stats.success_rate,
                         "ci_lo": stats.ci_lo, "ci_hi": stats.ci_hi,
                         "stats": stats})
    return rows


def sweep_target_count(scenario: Scenario, n_trials: int = 100, seed_base: int = 1,
                       levels: tuple = DEFAULT_TARGET_LEVELS,
                       strategies: tuple = ("shepherd", "traditional")) -> list[dict]:
    """Per-(strategy, target count) mean capture fraction; packs scale 1:1."""
    rows = []
    for strategy in strategies:
        for level in levels:
            sc = replace(scenario, strategy=strategy, n_targets=level, n_packs=level)
            stats = batch_stats(run_batch(BatchConfig(sc, n_trials, seed_base)),
                                scenario.max_duration)
            rows.append({"level": level, "strategy": strategy,
                         "success": stats.success_rate,
                         "ci_lo": stats.ci_lo, "ci_hi": stats.ci_hi,
                         "stats": stats})
    return rows


def phase_timeline_export(results: list[TrialResult]) -> list[dict]:
    """Flatten per-pack phase intervals: {trial, pack, phase, start, end}."""
    rows = []
    for trial_idx, r in enumerate(results):
        for pack, episode, phase, start, end in sorted(r.timeline):
            rows.append({"trial": trial_idx, "pack": pack, "episode": episode,
                         "phase": phase, "start": start, "end": end})
    return rows


def phase_duration_stats(timeline_rows: list[dict]) -> dict[str, dict]:
    """Mean/min/max duration per phase across all intervals."""
    by_phase: dict[str, list[float]] = {}
    for row in timeline_rows:
        by_phase.setdefault(row["phase"], []).append(row["end"] - row["start"])
    out = {}
    for phase, durs in sorted(by_phase.items()):
        out[phase] = {"count": len(durs), "mean": sum(durs) / len(durs),
                      "min": min(durs), "max": max(durs)}
    return out


# ---------------------------------------------------------------------------
# Output serialization (9 significant digits for floats).

def _r9(x):
    if isinstance(x, float):
        return float(f"{x:.9g}")
    return x


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def write_summary(stats: BatchStats, path: Path, extra: dict | None = None) -> None:
    doc = {
        "n_trials": stats.n_trials,
        "n_targets_total": stats.n_targets_total,
        "n_captures": stats.n_captures,
        "success_rate": _r9(stats.success_rate),
        "ci_lo": _r9(stats.ci_lo),
        "ci_hi": _r9(stats.ci_hi),
        "tti_q25": _r9(stats.tti_q25),
        "tti_median": _r9(stats.tti_median),
        "tti_q75": _r9(stats.tti_q75),
        "mean_pack_energy": _r9(stats.mean_pack_energy),
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_curve(stats: BatchStats, path: Path, step: float = CURVE_STEP) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "fraction"])
        for i, v in enumerate(stats.curve):
            w.writerow([_fmt(i * step), _fmt(v)])


def write_tti(stats: BatchStats, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "capture_time"])
        for trial_idx, t in stats.capture_times:
            w.writerow([trial_idx, _fmt(t)])


def write_sweep(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "strategy", "success", "ci_lo", "ci_hi"])
        for row in rows:
            w.writerow([_fmt(row["level"]), row["strategy"], _fmt(row["success"]),
                        _fmt(row["ci_lo"]), _fmt(row["ci_hi"])])


def write_timeline(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "pack", "phase", "start", "end"])
        for row in rows:
            w.writerow([row["trial"], row["pack"], row["phase"],
                        _fmt(row["start"]), _fmt(row["end"])])

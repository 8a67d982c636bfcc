"""Escape-probability bounds and containment-condition analysis.

Coverage is evaluated in the horizontal plane: the target can reach a disk of
radius v_target_max * dt within one horizon step, and each interceptor covers
a disk of radius r_intercept. The per-step escape bound is
max(0, 1 - A_covered / A_reachable), where A_covered is the raw area of the
union of the interception disks and A_reachable is the reach-disk area; the
bound clips to exactly zero once the covered area matches the reachable area.
covered_fraction additionally reports the covered share of the reach disk
itself, a stricter quantity useful for diagnosing local coverage.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .kinematics import Vec3
from .pack_coordination import slot_position

SQRT2 = math.sqrt(2.0)


class InvalidParameterError(ValueError):
    """An analysis input is outside its documented range."""


@dataclass(frozen=True)
class CoverageParams:
    r_intercept: float = 25.0
    v_target_max: float = 35.0
    horizon_dt: float = 0.1
    mc_samples: int = 10000
    mc_seed: int = 0

    def __post_init__(self):
        if self.r_intercept <= 0 or self.v_target_max <= 0 or self.horizon_dt <= 0:
            raise InvalidParameterError("coverage parameters must be positive")
        if self.mc_samples < 1000:
            raise InvalidParameterError("mc_samples must be at least 1000")


def reachable_area(v_target_max: float, horizon_dt: float) -> float:
    """Area of the disk the target can reach within one horizon step."""
    if v_target_max < 0 or horizon_dt < 0:
        raise InvalidParameterError("reachable_area inputs must be non-negative")
    r = v_target_max * horizon_dt
    return math.pi * r * r


def covered_fraction(interceptor_positions: list[Vec3], target_pos: Vec3,
                     cp: CoverageParams) -> float:
    """Monte Carlo fraction of the target's reachable disk covered by interceptors.

    Samples are drawn uniformly (seeded, deterministic) in the horizontal disk
    of radius v_target_max * horizon_dt around the target; a sample counts as
    covered if it lies within horizontal distance r_intercept of any
    interceptor.
    """
    if not interceptor_positions:
        return 0.0
    reach = cp.v_target_max * cp.horizon_dt
    rng = np.random.default_rng(cp.mc_seed)
    r = reach * np.sqrt(rng.random(cp.mc_samples))
    ang = rng.random(cp.mc_samples) * (2.0 * math.pi)
    x = target_pos[0] + r * np.cos(ang)
    y = target_pos[1] + r * np.sin(ang)
    covered = np.zeros(cp.mc_samples, dtype=bool)
    r2 = cp.r_intercept * cp.r_intercept
    for p in interceptor_positions:
        covered |= (x - p[0]) ** 2 + (y - p[1]) ** 2 <= r2
    return float(np.count_nonzero(covered)) / cp.mc_samples


def escape_probability(fraction: float) -> float:
    """Per-step escape bound: the uncovered share of the reachable disk."""
    if not 0.0 <= fraction <= 1.0:
        raise InvalidParameterError(f"fraction must be in [0, 1], got {fraction}")
    return max(0.0, 1.0 - fraction)


def union_covered_area(interceptor_positions: list[Vec3], r_intercept: float,
                       mc_samples: int = 10000, mc_seed: int = 0) -> float:
    """Monte Carlo area of the union of the interception disks (horizontal).

    This is the covered area as the escape-bound formula defines it: the raw
    union of per-interceptor disks, not clipped to the reachable disk, which
    is why a maintained formation drives the bound to exactly zero.
    """
    if not interceptor_positions:
        return 0.0
    if r_intercept <= 0:
        raise InvalidParameterError("r_intercept must be positive")
    xs = [p[0] for p in interceptor_positions]
    ys = [p[1] for p in interceptor_positions]
    lo_x, hi_x = min(xs) - r_intercept, max(xs) + r_intercept
    lo_y, hi_y = min(ys) - r_intercept, max(ys) + r_intercept
    rng = np.random.default_rng(mc_seed)
    x = lo_x + rng.random(mc_samples) * (hi_x - lo_x)
    y = lo_y + rng.random(mc_samples) * (hi_y - lo_y)
    covered = np.zeros(mc_samples, dtype=bool)
    r2 = r_intercept * r_intercept
    for p in interceptor_positions:
        covered |= (x - p[0]) ** 2 + (y - p[1]) ** 2 <= r2
    box = (hi_x - lo_x) * (hi_y - lo_y)
    return float(np.count_nonzero(covered)) / mc_samples * box


def escape_bound_from_areas(a_covered: float, a_reachable: float) -> float:
    """max(0, 1 - A_covered / A_reachable); zero reachable area means no escape."""
    if a_covered < 0 or a_reachable < 0:
        raise InvalidParameterError("areas must be non-negative")
    if a_reachable == 0.0:
        return 0.0
    return max(0.0, 1.0 - a_covered / a_reachable)


def containment_condition(r_formation: float, r_intercept: float,
                          v_target_max: float, horizon_dt: float) -> bool:
    """True iff r_formation + r_intercept >= sqrt(2) * v_target_max * horizon_dt."""
    if r_formation <= 0 or r_intercept <= 0 or v_target_max <= 0 or horizon_dt < 0:
        raise InvalidParameterError("containment inputs must be positive")
    return r_formation + r_intercept >= SQRT2 * v_target_max * horizon_dt


def cumulative_success(escape_probs: list[float]) -> float:
    """1 minus the product of per-step escape bounds; empty series gives 0."""
    if not escape_probs:
        return 0.0
    prod = 1.0
    for p in escape_probs:
        if not 0.0 <= p <= 1.0:
            raise InvalidParameterError(f"escape probability out of range: {p}")
        prod *= p
    return 1.0 - prod


def slot_coverage_sweep(dts: list[float], r_formation: float = 40.0,
                        r_intercept: float = 25.0, v_target_max: float = 35.0,
                        mc_samples: int = 10000, mc_seed: int = 0) -> list[dict]:
    """Escape-bound sweep over horizon values with members on ideal slots.

    Rows: dt, r_formation, r_intercept, condition_holds, escape_prob_bound.
    """
    target = (0.0, 0.0, 0.0)
    slots = [slot_position(target, 0.0, i, r_formation) for i in range(4)]
    a_cov = union_covered_area(slots, r_intercept, mc_samples, mc_seed)
    rows = []
    for dt in dts:
        rows.append({
            "dt": dt,
            "r_formation": r_formation,
            "r_intercept": r_intercept,
            "condition_holds": containment_condition(r_formation, r_intercept,
                                                     v_target_max, dt),
            "escape_prob_bound": escape_bound_from_areas(
                a_cov, reachable_area(v_target_max, dt)),
        })
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dt", "r_formation", "r_intercept",
                         "condition_holds", "escape_prob_bound"])
        for row in rows:
            writer.writerow([f"{row['dt']:.9g}", f"{row['r_formation']:.9g}",
                             f"{row['r_intercept']:.9g}",
                             int(row["condition_holds"]),
                             f"{row['escape_prob_bound']:.9g}"])

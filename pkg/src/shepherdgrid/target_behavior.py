"""Evasive target controller: a three-mode threat-response state machine.

The target cruises with random heading changes when no interceptor is close,
accelerates toward the widest angular gap in interceptor coverage at medium
range, and executes short full-throttle escape bursts away from the
interceptor centroid at close range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from random import Random

from .kinematics import AgentState, MotionLimits, Vec3, vdist

EVASIVE_RANGE = 150.0       # m, below this the target maneuvers hard
EMERGENCY_RANGE = 60.0      # m, below this the target burst-escapes
BURST_DURATION = 1.5        # s, emergency burst length
CRUISE_GAIN = 0.5           # fraction of a_max used in nominal cruise
HEADING_INTERVAL = (2.0, 5.0)   # s, nominal heading-change interval bounds
VERTICAL_AMPLITUDE = 2.0    # m/s^2, evasive vertical weave
VERTICAL_PERIOD = 8.0       # s

TWO_PI = 2.0 * math.pi


class ThreatLevel(Enum):
    NOMINAL = "nominal"
    EVASIVE = "evasive"
    EMERGENCY = "emergency"


@dataclass(frozen=True)
class TargetMode:
    mode: ThreatLevel
    mode_entry_time: float
    next_heading_change_time: float
    current_heading: float
    burst_deadline: float = 0.0
    turn_sign: float = 1.0  # +1 left / -1 right, latched on evasive entry


def initial_mode(t: float, heading: float, rng: Random) -> TargetMode:
    interval = rng.uniform(*HEADING_INTERVAL)
    return TargetMode(ThreatLevel.NOMINAL, t, t + interval, heading)


def update_mode(tm: TargetMode, target: AgentState, interceptors: list[Vec3], t: float) -> TargetMode:
    """Advance the threat FSM from the nearest-interceptor distance.

    An emergency burst persists until its deadline even if the nearest
    interceptor backs off; with no interceptors in view the target is nominal.
    """
    if tm.mode is ThreatLevel.EMERGENCY and t < tm.burst_deadline:
        return tm
    if not interceptors:
        desired = ThreatLevel.NOMINAL
    else:
        d_min = min(vdist(target.pos, p) for p in interceptors)
        if d_min < EMERGENCY_RANGE:
            desired = ThreatLevel.EMERGENCY
        elif d_min < EVASIVE_RANGE:
            desired = ThreatLevel.EVASIVE
        else:
            desired = ThreatLevel.NOMINAL
    if desired is ThreatLevel.EMERGENCY:
        # Entering (or re-arming after a finished burst).
        entry = t if tm.mode is not ThreatLevel.EMERGENCY else tm.mode_entry_time
        return replace(tm, mode=desired, mode_entry_time=entry, burst_deadline=t + BURST_DURATION)
    if desired is tm.mode:
        return tm
    nm = replace(tm, mode=desired, mode_entry_time=t)
    if desired is ThreatLevel.NOMINAL:
        # Force a fresh heading draw on the next control update.
        nm = replace(nm, next_heading_change_time=t)
    elif desired is ThreatLevel.EVASIVE:
        # Latch the turn direction toward the widest coverage gap.
        gap = largest_gap_bearing(target.pos, interceptors, tm.current_heading)
        vel_heading = math.atan2(target.vel[1], target.vel[0])
        delta = (gap - vel_heading) % TWO_PI
        nm = replace(nm, turn_sign=1.0 if delta <= math.pi else -1.0)
    return nm


def largest_gap_bearing(target_pos: Vec3, interceptor_positions: list[Vec3],
                        fallback_heading: float = 0.0) -> float:
    """Midpoint bearing of the largest circular gap between interceptor bearings.

    Interceptors horizontally coincident with the target are skipped; if all
    are skipped the fallback heading is returned. Ties break toward the gap
    with the smallest starting bearing.
    """
    bearings = []
    for p in interceptor_positions:
        dx = p[0] - target_pos[0]
        dy = p[1] - target_pos[1]
        if math.hypot(dx, dy) < 1e-9:
            continue
        bearings.append(math.atan2(dy, dx) % TWO_PI)
    if not bearings:
        return fallback_heading
    bearings.sort()
    best_start = bearings[0]
    best_gap = -1.0
    n = len(bearings)
    for i in range(n):
        start = bearings[i]
        end = bearings[(i + 1) % n] if i + 1 < n else bearings[0] + TWO_PI
        gap = end - start
        if gap > best_gap + 1e-12:
            best_gap = gap
            best_start = start
    return (best_start + best_gap / 2.0) % TWO_PI


def evasion_accel(tm: TargetMode, target: AgentState, interceptors: list[Vec3],
                  t: float, rng: Random, limits: MotionLimits) -> tuple[Vec3, TargetMode]:
    """Commanded acceleration for the current mode; returns updated mode state.

    |accel| never exceeds limits.a_max.
    """
    a_max = limits.a_max
    if tm.mode is ThreatLevel.NOMINAL:
        if t >= tm.next_heading_change_time:
            heading = rng.uniform(0.0, TWO_PI)
            interval = rng.uniform(*HEADING_INTERVAL)
            tm = replace(tm, current_heading=heading, next_heading_change_time=t + interval)
        mag = CRUISE_GAIN * a_max
        return (mag * math.cos(tm.current_heading), mag * math.sin(tm.current_heading), 0.0), tm

    if tm.mode is ThreatLevel.EVASIVE:
        # Sustained maximum-rate turn toward the widest coverage gap: the turn
        # direction latches on mode entry (see update_mode) so the evader
        # carves a consistent arc instead of dithering between bearings.
        az = VERTICAL_AMPLITUDE * math.sin(TWO_PI * t / VERTICAL_PERIOD)
        ah = math.sqrt(a_max * a_max - az * az)
        vx, vy = target.vel[0], target.vel[1]
        speed = math.hypot(vx, vy)
        if speed > 1e-9:
            px, py = -vy / speed * tm.turn_sign, vx / speed * tm.turn_sign
        else:
            bearing = largest_gap_bearing(target.pos, interceptors, tm.current_heading)
            px, py = math.cos(bearing), math.sin(bearing)
        return (ah * px, ah * py, az), tm

    # Emergency: break turn at full acceleration, perpendicular to the nearest
    # threat's line of sight, continuing the current turn direction. A straight
    # flee from a faster pursuer is a guaranteed stern-chase loss; the beam
    # turn forces overshoot unless the threat's approach is already crossing.
    if interceptors:
        nearest = min(interceptors, key=lambda p: vdist(target.pos, p))
        lx = target.pos[0] - nearest[0]
        ly = target.pos[1] - nearest[1]
        d = math.hypot(lx, ly)
        if d > 1e-9:
            px, py = -ly / d, lx / d
            if px * target.vel[0] + py * target.vel[1] < 0.0:
                px, py = -px, -py
            return (a_max * px, a_max * py, 0.0), tm
    # Degenerate geometry (or no interceptors left): flee along current heading.
    return (a_max * math.cos(tm.current_heading), a_max * math.sin(tm.current_heading), 0.0), tm

"""Pack coordination: four-phase FSM, formation geometry, and pursuit laws.

A pack is exactly four interceptors. It progresses chase -> follow -> form ->
engage around its assigned target; while engaged, one member (the striker)
attacks and the other three hold rotating formation slots. The uncoordinated
baseline runs the same predictive-pursuit law on every interceptor with no
phases or roles.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .kinematics import AgentState, MotionLimits, Vec3, ZERO, vdist, vnorm, vsub

HALF_PI = math.pi / 2.0


class PackPhase(Enum):
    CHASE = "chase"
    FOLLOW = "follow"
    FORM = "form"
    ENGAGE = "engage"


@dataclass(frozen=True)
class StrategyParams:
    tau_chase: float = 5.0      # s, minimum chase duration
    eps_ready: float = 15.0     # m, slot tolerance for readiness
    r_formation: float = 40.0   # m, formation ring radius
    v_orbit: float = 30.0       # m/s, tangential orbit speed
    k_strike: float = 4.5       # striker command gain
    tau_horizon: float = 3.0    # s, predictive pursuit horizon
    r_intercept: float = 25.0   # m, coverage disk radius (analysis only)
    d_predictive: float = 100.0  # m, striker switches to direct pursuit below this
    v_margin: float = 5.0       # m/s, shepherd speed advantage floor
    d_follow: float = 150.0     # m, chase->follow proximity threshold
    d_form: float = 80.0        # m, follow->form proximity threshold
    t_form_hold: float = 2.0    # s, time d_form must be sustained
    t_regress: float = 3.0      # s, broken readiness before engage->form
    k_radial: float = 1.0       # 1/s, slot/standoff position-error gain
    k_slot: float = 4.0         # 1/s, shepherd slot-tracking gain (see note below)
    k_vel: float = 2.0          # 1/s, velocity-tracking gain
    standoff: float = 60.0      # m, follow-phase trailing distance

    # Shepherd slot tracking uses k_slot rather than k_radial: with the orbit
    # term active, a member settles v_orbit/k_slot metres off its slot, so the
    # gain must satisfy v_orbit/k_slot < eps_ready or readiness never latches.

    def __post_init__(self):
        for name in ("tau_chase", "eps_ready", "r_formation", "v_orbit", "k_strike",
                     "tau_horizon", "r_intercept", "d_predictive", "v_margin",
                     "d_follow", "d_form", "t_form_hold", "t_regress",
                     "k_radial", "k_slot", "k_vel", "standoff"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.eps_ready >= self.r_formation:
            raise ValueError("eps_ready must be smaller than r_formation")


@dataclass(frozen=True)
class PackState:
    phase: PackPhase = PackPhase.CHASE
    phase_entry_time: float = 0.0
    members: tuple[int, int, int, int] = (0, 1, 2, 3)
    slot_of_member: tuple[int, int, int, int] = (0, 1, 2, 3)
    active_interceptor: int | None = None  # member index 0..3, set iff ENGAGE
    last_target_heading: float = 0.0
    # Internal transition timers.
    form_hold_since: float | None = None
    unready_since: float | None = None


def slot_position(target_pos: Vec3, heading: float, slot_index: int, r: float) -> Vec3:
    ang = heading + slot_index * HALF_PI
    return (target_pos[0] + r * math.cos(ang),
            target_pos[1] + r * math.sin(ang),
            target_pos[2])


def formation_heading(target_vel: Vec3, last_heading: float) -> float:
    """Target heading used for slot geometry; held when nearly stationary."""
    if math.hypot(target_vel[0], target_vel[1]) > 0.5:
        return math.atan2(target_vel[1], target_vel[0])
    return last_heading


def formation_slots(target_pos: Vec3, target_vel: Vec3, last_heading: float,
                    r: float) -> tuple[list[Vec3], float]:
    """Four slots at radius r, 90 degrees apart, rotating with target heading."""
    if r <= 0:
        raise ValueError("formation radius must be positive")
    heading = formation_heading(target_vel, last_heading)
    slots = [slot_position(target_pos, heading, i, r) for i in range(4)]
    return slots, heading


def formation_ready(member_positions: list[Vec3], slots: list[Vec3], eps_ready: float) -> bool:
    """True iff at least three of the four members are within eps of their slot."""
    in_tolerance = sum(1 for p, s in zip(member_positions, slots) if vdist(p, s) <= eps_ready)
    return in_tolerance >= 3


def select_active(member_positions: list[Vec3], target_pos: Vec3) -> int:
    """Member index closest to the target; ties break to the lowest index."""
    best = 0
    best_d = vdist(member_positions[0], target_pos)
    for i in range(1, len(member_positions)):
        d = vdist(member_positions[i], target_pos)
        if d < best_d:
            best, best_d = i, d
    return best


def assign_slots(member_positions: list[Vec3], slots: list[Vec3]) -> tuple[int, int, int, int]:
    """Minimum-total-distance member->slot assignment (brute force, 24 perms)."""
    best_perm = None
    best_cost = math.inf
    for perm in itertools.permutations(range(4)):
        cost = sum(vdist(member_positions[m], slots[perm[m]]) for m in range(4))
        if cost < best_cost - 1e-12:
            best_cost = cost
            best_perm = perm
    return best_perm


def transition(ps: PackState, t: float, avg_dist: float, ready: bool,
               d_min_active: float, params: StrategyParams,
               member_positions: list[Vec3] | None = None,
               target_pos: Vec3 | None = None,
               slots: list[Vec3] | None = None) -> PackState:
    """One FSM update. Legal moves: C->F, F->Fo, Fo->E, and E->Fo regression.

    On entering FORM the slot assignment is re-solved; on entering ENGAGE the
    striker is chosen by distance minimization; leaving ENGAGE clears it.
    """
    phase = ps.phase
    if phase is PackPhase.CHASE:
        if t - ps.phase_entry_time >= params.tau_chase and avg_dist <= params.d_follow:
            return replace(ps, phase=PackPhase.FOLLOW, phase_entry_time=t,
                           form_hold_since=None)
        return ps

    if phase is PackPhase.FOLLOW:
        if avg_dist <= params.d_form:
            since = ps.form_hold_since if ps.form_hold_since is not None else t
            if t - since >= params.t_form_hold:
                new_slots = ps.slot_of_member
                if member_positions is not None and slots is not None:
                    perm = assign_slots(member_positions, slots)
                    new_slots = perm
                return replace(ps, phase=PackPhase.FORM, phase_entry_time=t,
                               slot_of_member=new_slots, form_hold_since=None,
                               unready_since=None)
            return replace(ps, form_hold_since=since)
        if ps.form_hold_since is not None:
            return replace(ps, form_hold_since=None)
        return ps

    if phase is PackPhase.FORM:
        if ready:
            striker = None
            if member_positions is not None and target_pos is not None:
                striker = select_active(member_positions, target_pos)
            return replace(ps, phase=PackPhase.ENGAGE, phase_entry_time=t,
                           active_interceptor=striker, unready_since=None)
        return ps

    # ENGAGE: regress to FORM after sustained formation collapse.
    if ready:
        if ps.unready_since is not None:
            return replace(ps, unready_since=None)
        return ps
    since = ps.unready_since if ps.unready_since is not None else t
    if t - since > params.t_regress:
        new_slots = ps.slot_of_member
        if member_positions is not None and slots is not None:
            new_slots = assign_slots(member_positions, slots)
        return replace(ps, phase=PackPhase.FORM, phase_entry_time=t,
                       active_interceptor=None, slot_of_member=new_slots,
                       unready_since=None)
    return replace(ps, unready_since=since)


def _predictive_aim(member_pos: Vec3, target: AgentState, v_max: float, tau: float) -> Vec3:
    d = vdist(target.pos, member_pos)
    t_pred = min(tau, d / v_max)
    return (target.pos[0] + target.vel[0] * t_pred,
            target.pos[1] + target.vel[1] * t_pred,
            target.pos[2] + target.vel[2] * t_pred)


def _toward(member_pos: Vec3, aim: Vec3, magnitude: float) -> Vec3:
    dx = aim[0] - member_pos[0]
    dy = aim[1] - member_pos[1]
    dz = aim[2] - member_pos[2]
    d = math.sqrt(dx * dx + dy * dy + dz * dz)
    if d < 1e-6:
        return ZERO
    s = magnitude / d
    return (dx * s, dy * s, dz * s)


def striker_accel(striker: AgentState, target: AgentState,
                  params: StrategyParams, limits: MotionLimits) -> Vec3:
    """Strike command: predictive interception at long range, direct pursuit close in.

    The raw magnitude a_max * k_strike is a command gain; the integrator
    saturates it to the platform's a_max unless striker authority is enabled.
    """
    d = vdist(target.pos, striker.pos)
    if d > params.d_predictive:
        aim = _predictive_aim(striker.pos, target, limits.v_max, params.tau_horizon)
    else:
        aim = target.pos
    return _toward(striker.pos, aim, limits.a_max * params.k_strike)


def chase_accel(member: AgentState, target: AgentState,
                params: StrategyParams, limits: MotionLimits) -> Vec3:
    """Predictive pursuit at unit gain: the chase-phase and baseline law."""
    aim = _predictive_aim(member.pos, target, limits.v_max, params.tau_horizon)
    return _toward(member.pos, aim, limits.a_max)


def traditional_accel(member: AgentState, target: AgentState,
                      params: StrategyParams, limits: MotionLimits) -> Vec3:
    """Uncoordinated baseline: every interceptor runs predictive pursuit."""
    return chase_accel(member, target, params, limits)


def follow_accel(member: AgentState, target: AgentState,
                 params: StrategyParams) -> Vec3:
    """Hold a trailing standoff point while matching target velocity."""
    rel = vsub(target.pos, member.pos)
    n = vnorm(rel)
    if n < 1e-9:
        vn = vnorm(member.vel)
        u = (member.vel[0] / vn, member.vel[1] / vn, member.vel[2] / vn) if vn > 1e-9 else (1.0, 0.0, 0.0)
    else:
        u = (rel[0] / n, rel[1] / n, rel[2] / n)
    desired = (target.pos[0] - params.standoff * u[0],
               target.pos[1] - params.standoff * u[1],
               target.pos[2] - params.standoff * u[2])
    v_des = (target.vel[0] + params.k_radial * (desired[0] - member.pos[0]),
             target.vel[1] + params.k_radial * (desired[1] - member.pos[1]),
             target.vel[2] + params.k_radial * (desired[2] - member.pos[2]))
    return (params.k_vel * (v_des[0] - member.vel[0]),
            params.k_vel * (v_des[1] - member.vel[1]),
            params.k_vel * (v_des[2] - member.vel[2]))


def shepherd_accel(member: AgentState, slot: Vec3, slot_index: int, heading: float,
                   target: AgentState, params: StrategyParams,
                   limits: MotionLimits) -> Vec3:
    """Orbit-plus-slot-correction law for formation-holding members.

    Desired velocity = target velocity + tangential orbit + slot correction,
    floored to target speed + v_margin so shepherds keep a speed advantage.
    """
    ang = heading + slot_index * HALF_PI
    tx = -math.sin(ang)
    ty = math.cos(ang)
    v_des = (target.vel[0] + params.v_orbit * tx + params.k_slot * (slot[0] - member.pos[0]),
             target.vel[1] + params.v_orbit * ty + params.k_slot * (slot[1] - member.pos[1]),
             target.vel[2] + params.k_slot * (slot[2] - member.pos[2]))
    floor = vnorm(target.vel) + params.v_margin
    n = vnorm(v_des)
    if n < floor:
        if n > 1e-9:
            s = floor / n
            v_des = (v_des[0] * s, v_des[1] * s, v_des[2] * s)
        else:
            v_des = (floor * tx, floor * ty, 0.0)
    return (params.k_vel * (v_des[0] - member.vel[0]),
            params.k_vel * (v_des[1] - member.vel[1]),
            params.k_vel * (v_des[2] - member.vel[2]))

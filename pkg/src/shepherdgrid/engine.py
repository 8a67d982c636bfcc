"""Deterministic fixed-step trial executor.

One trial = one scenario + one seed. All randomness flows through named
substreams derived from the trial seed ("place", "target:<i>",
"chan:<pack>:<member>"), so adding instrumentation never shifts outcomes and
identical inputs give bit-identical results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from random import Random

from . import comms, pack_coordination as pc, target_behavior as tb
from .coverage import escape_bound_from_areas, reachable_area, union_covered_area
from .kinematics import (AgentState, InvalidStateError, MotionLimits, Vec3, ZERO,
                         contain, reflect_accel_inward, step, vdist, vnorm)

INTERCEPTOR_LIMITS = MotionLimits(v_max=50.0, a_max=15.0)
TARGET_LIMITS = MotionLimits(v_max=35.0, a_max=10.0)

ENERGY_HOVER = 1.0      # units/s baseline draw
ENERGY_MANEUVER = 0.02  # units*s^3/m^2 per squared acceleration

PLACEMENT_SPEED_FACTOR = 0.8  # targets start at this fraction of v_max
PLACEMENT_Z = (100.0, 400.0)
PACK_SPREAD = 100.0           # m, member scatter around the pack anchor

SHEPHERD = "shepherd"
TRADITIONAL = "traditional"

_LIMIT_TOL = 1.0 + 1e-9


class TrialAbortedError(RuntimeError):
    """Non-finite state reached; an engine defect, not an escape."""


@dataclass(frozen=True)
class Scenario:
    n_targets: int = 1
    n_packs: int = 1
    strategy: str = SHEPHERD
    loss_prob: float = 0.0
    comms_enabled: bool = True
    leader_observes_target: bool = True
    arena: Vec3 = (2000.0, 2000.0, 500.0)
    max_duration: float = 300.0
    capture_radius: float = 5.0
    dt: float = 0.1
    seed: int = 0
    params: pc.StrategyParams = field(default_factory=pc.StrategyParams)
    striker_accel_authority: bool = False
    record_trace: bool = False
    record_escape_trace: bool = False
    escape_mc_samples: int = 10000

    def __post_init__(self):
        if self.n_targets < 1 or self.n_packs < 1:
            raise ValueError("need at least one target and one pack")
        if self.capture_radius <= 0 or self.max_duration <= 0 or self.dt <= 0:
            raise ValueError("capture_radius, max_duration and dt must be positive")
        if self.strategy not in (SHEPHERD, TRADITIONAL):
            raise ValueError(f"unknown strategy: {self.strategy}")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")


@dataclass
class TargetOutcome:
    captured: bool = False
    capture_time: float | None = None
    capturing_member: int | None = None  # global interceptor index
    capture_phase: str | None = None     # pack phase at capture, or "traditional"


@dataclass(frozen=True)
class PhaseEvent:
    time: float
    pack: int
    episode: int
    from_phase: pc.PackPhase
    to_phase: pc.PackPhase


@dataclass
class TrialResult:
    seed: int
    outcomes: list[TargetOutcome]
    energy: list[float]                 # per interceptor
    events: list[PhaseEvent]
    timeline: list[tuple]               # (pack, episode, phase name, start, end)
    duration: float
    vel_violations: int = 0
    accel_violations: int = 0
    escape_trace: list[tuple] = field(default_factory=list)  # (t, all_on_slots, bound|None)
    trace: list[tuple] = field(default_factory=list)


def energy_of(accel_magnitudes: list[float], dt: float) -> float:
    """Energy proxy of one member's acceleration trace."""
    return sum(dt * (ENERGY_HOVER + ENERGY_MANEUVER * a * a) for a in accel_magnitudes)


def _boundary_point(rng: Random, arena: Vec3) -> Vec3:
    ax, ay, _ = arena
    zlo, zhi = PLACEMENT_Z
    face = rng.randrange(4)
    along = rng.uniform(0.0, ay if face < 2 else ax)
    zc = rng.uniform(zlo, zhi)
    if face == 0:
        return (0.0, along, zc)
    if face == 1:
        return (ax, along, zc)
    if face == 2:
        return (along, 0.0, zc)
    return (along, ay, zc)


def place_initial(scenario: Scenario, rng: Random):
    """Targets in the central region, interceptor groups on lateral boundary faces.

    Both strategies use identical placement (groups of four within PACK_SPREAD
    of a boundary anchor) so performance differences come from coordination,
    not starting geometry.
    """
    ax, ay, az = scenario.arena
    zlo, zhi = PLACEMENT_Z
    targets = []
    for _ in range(scenario.n_targets):
        x = rng.uniform(0.25 * ax, 0.75 * ax)
        y = rng.uniform(0.25 * ay, 0.75 * ay)
        z = rng.uniform(zlo, zhi)
        heading = rng.uniform(0.0, 2.0 * math.pi)
        speed = PLACEMENT_SPEED_FACTOR * TARGET_LIMITS.v_max
        vel = (speed * math.cos(heading), speed * math.sin(heading), 0.0)
        targets.append(AgentState((x, y, z), vel))
    interceptors = []
    anchors = []
    for _ in range(scenario.n_packs):
        anchor = _boundary_point(rng, scenario.arena)
        anchors.append(anchor)
        on_x_face = anchor[0] in (0.0, ax)
        for _ in range(4):
            du = rng.uniform(-PACK_SPREAD, PACK_SPREAD)
            dz = rng.uniform(-PACK_SPREAD, PACK_SPREAD)
            z = min(max(anchor[2] + dz, 0.0), az)
            if on_x_face:
                pos = (anchor[0], min(max(anchor[1] + du, 0.0), ay), z)
            else:
                pos = (min(max(anchor[0] + du, 0.0), ax), anchor[1], z)
            interceptors.append(AgentState(pos, ZERO))
    return targets, interceptors, anchors


def assign_packs(pack_positions: list[Vec3], target_positions: list[Vec3]):
    """Greedy globally-closest matching; surplus targets queue by distance.

    Returns (assignment dict pack->target, queued target indices).
    """
    free_packs = set(range(len(pack_positions)))
    free_targets = set(range(len(target_positions)))
    assignment: dict[int, int] = {}
    while free_packs and free_targets:
        best = None
        best_d = math.inf
        for p in sorted(free_packs):
            for t in sorted(free_targets):
                d = vdist(pack_positions[p], target_positions[t])
                if d < best_d:
                    best_d = d
                    best = (p, t)
        assignment[best[0]] = best[1]
        free_packs.discard(best[0])
        free_targets.discard(best[1])
    queue = sorted(
        free_targets,
        key=lambda t: (min(vdist(pack_positions[p], target_positions[t])
                           for p in range(len(pack_positions))), t),
    )
    return assignment, queue


class _Pack:
    """Mutable per-trial pack bookkeeping (engine-internal)."""

    __slots__ = ("pid", "members", "state", "target", "episode", "memories",
                 "chan_rngs", "phase_start")

    def __init__(self, pid: int, members: list[int], chan_rngs):
        self.pid = pid
        self.members = members
        self.state = pc.PackState()
        self.target: int | None = None
        self.episode = 0
        self.memories: list[comms.TrackMemory | None] = [None] * 4
        self.chan_rngs = chan_rngs
        self.phase_start = 0.0


def run_trial(scenario: Scenario) -> TrialResult:
    if scenario.strategy == SHEPHERD:
        return _run_shepherd(scenario)
    return _run_traditional(scenario)


def _seed_rng(seed: int, name: str) -> Random:
    return Random(f"{seed}:{name}")


def _check_limits(state: AgentState, limits: MotionLimits, result: TrialResult):
    if vnorm(state.vel) > limits.v_max * _LIMIT_TOL:
        result.vel_violations += 1
    if vnorm(state.last_accel) > limits.a_max * _LIMIT_TOL:
        result.accel_violations += 1


def _run_shepherd(sc: Scenario) -> TrialResult:
    params = sc.params
    rng_place = _seed_rng(sc.seed, "place")
    target_states, int_states, anchors = place_initial(sc, rng_place)
    target_rngs = [_seed_rng(sc.seed, f"target:{i}") for i in range(sc.n_targets)]
    target_modes = []
    for i, ts in enumerate(target_states):
        heading = math.atan2(ts.vel[1], ts.vel[0])
        target_modes.append(tb.initial_mode(0.0, heading, target_rngs[i]))
    resolved = [False] * sc.n_targets
    outcomes = [TargetOutcome() for _ in range(sc.n_targets)]
    energy = [0.0] * len(int_states)

    packs = []
    for p in range(sc.n_packs):
        chan = [_seed_rng(sc.seed, f"chan:{p}:{m}") for m in range(4)]
        packs.append(_Pack(p, [4 * p + m for m in range(4)], chan))
    assignment, queue = assign_packs(anchors, [t.pos for t in target_states])
    for p, t in assignment.items():
        packs[p].target = t

    result = TrialResult(seed=sc.seed, outcomes=outcomes, energy=energy,
                         events=[], timeline=[], duration=0.0)
    striker_limits = (MotionLimits(INTERCEPTOR_LIMITS.v_max,
                                   INTERCEPTOR_LIMITS.a_max * params.k_strike)
                      if sc.striker_accel_authority else INTERCEPTOR_LIMITS)

    n_ticks = int(round(sc.max_duration / sc.dt))
    n_resolved = 0
    dt = sc.dt
    staleness = comms.STALENESS_LIMIT

    def close_timeline(pack: _Pack, end: float):
        result.timeline.append((pack.pid, pack.episode,
                                pack.state.phase.value, pack.phase_start, end))

    for k in range(n_ticks):
        if n_resolved >= sc.n_targets:
            break
        t = k * dt
        t_next = (k + 1) * dt

        # 1. Target threat FSMs and evasion commands.
        target_cmds = [ZERO] * sc.n_targets
        threats_of = [[] for _ in range(sc.n_targets)]
        for pack in packs:
            if pack.target is not None:
                threats_of[pack.target] = [int_states[m].pos for m in pack.members]
        for ti in range(sc.n_targets):
            if resolved[ti]:
                continue
            tm = tb.update_mode(target_modes[ti], target_states[ti], threats_of[ti], t)
            accel, tm = tb.evasion_accel(tm, target_states[ti], threats_of[ti], t,
                                         target_rngs[ti], TARGET_LIMITS)
            target_modes[ti] = tm
            target_cmds[ti] = reflect_accel_inward(target_states[ti].pos, accel, sc.arena)

        # 2. Leader broadcast through the lossy channel.
        if sc.comms_enabled:
            for pack in packs:
                if pack.target is None:
                    # Keep per-member streams ticking so delivery patterns are
                    # a pure function of (seed, member, tick index).
                    for m in range(4):
                        pack.chan_rngs[m].random()
                    continue
                ts = target_states[pack.target]
                st = pack.state
                for m in range(4):
                    u = pack.chan_rngs[m].random()
                    if m == 0 and sc.leader_observes_target:
                        delivered = True
                    else:
                        delivered = u >= sc.loss_prob
                    if delivered:
                        pack.memories[m] = comms.TrackMemory(
                            ts.pos, ts.vel, t, st.phase, st.slot_of_member[m],
                            st.active_interceptor == m, st.last_target_heading)

        # 3. Per-member commands.
        int_cmds = [ZERO] * len(int_states)
        for pack in packs:
            if pack.target is None:
                continue
            st = pack.state
            true_target = target_states[pack.target]
            for m in range(4):
                gi = pack.members[m]
                member = int_states[gi]
                if sc.comms_enabled:
                    mem = pack.memories[m]
                    if mem is None or t - mem.last_update_time > staleness:
                        if mem is None:
                            est = true_target  # pre-first-broadcast, cannot happen after tick 0
                        else:
                            ep, ev = comms.dead_reckon(mem, t)
                            est = AgentState(ep, ev)
                        int_cmds[gi] = pc.traditional_accel(member, est, params,
                                                            INTERCEPTOR_LIMITS)
                        continue
                    ep, ev = comms.dead_reckon(mem, t)
                    est = AgentState(ep, ev)
                    phase = mem.last_phase
                    slot_index = mem.last_slot
                    is_striker = mem.last_active_flag
                    heading = pc.formation_heading(ev, mem.last_heading)
                else:
                    est = true_target
                    phase = st.phase
                    slot_index = st.slot_of_member[m]
                    is_striker = st.active_interceptor == m
                    heading = pc.formation_heading(true_target.vel,
                                                   st.last_target_heading)
                if phase is pc.PackPhase.CHASE:
                    cmd = pc.chase_accel(member, est, params, INTERCEPTOR_LIMITS)
                elif phase is pc.PackPhase.FOLLOW:
                    cmd = pc.follow_accel(member, est, params)
                elif phase is pc.PackPhase.ENGAGE and is_striker:
                    cmd = pc.striker_accel(member, est, params, INTERCEPTOR_LIMITS)
                else:
                    slot = pc.slot_position(est.pos, heading, slot_index,
                                            params.r_formation)
                    cmd = pc.shepherd_accel(member, slot, slot_index, heading,
                                            est, params, INTERCEPTOR_LIMITS)
                int_cmds[gi] = cmd

        # 4. Integration.
        for pack in packs:
            striker_gi = (pack.members[pack.state.active_interceptor]
                          if pack.state.active_interceptor is not None else None)
            for m in range(4):
                gi = pack.members[m]
                limits = striker_limits if gi == striker_gi else INTERCEPTOR_LIMITS
                ns = step(int_states[gi], int_cmds[gi], dt, limits)
                int_states[gi] = ns
                a = vnorm(ns.last_accel)
                energy[gi] += dt * (ENERGY_HOVER + ENERGY_MANEUVER * a * a)
                _check_limits(ns, limits, result)
        for ti in range(sc.n_targets):
            if resolved[ti]:
                continue
            ns = contain(step(target_states[ti], target_cmds[ti], dt, TARGET_LIMITS),
                         sc.arena)
            target_states[ti] = ns

        # 5. Capture detection (geometric, any phase).
        for pack in packs:
            ti = pack.target
            if ti is None or resolved[ti]:
                continue
            for m in range(4):
                gi = pack.members[m]
                if vdist(int_states[gi].pos, target_states[ti].pos) <= sc.capture_radius:
                    resolved[ti] = True
                    n_resolved += 1
                    outcomes[ti] = TargetOutcome(True, t_next, gi,
                                                 pack.state.phase.value)
                    close_timeline(pack, t_next)
                    # Release the pack; take the nearest queued target, if any.
                    if queue:
                        centroid = _centroid([int_states[g].pos for g in pack.members])
                        queue.sort(key=lambda q: (vdist(centroid,
                                                        target_states[q].pos), q))
                        pack.target = queue.pop(0)
                        pack.episode += 1
                        pack.state = pc.PackState(phase_entry_time=t_next)
                        pack.phase_start = t_next
                        nts = target_states[pack.target]
                        for mm in range(4):
                            pack.memories[mm] = comms.TrackMemory(
                                nts.pos, nts.vel, t_next, pc.PackPhase.CHASE,
                                mm, False, 0.0)
                    else:
                        pack.target = None
                    break

        # 6. Pack FSM updates from ground truth.
        for pack in packs:
            ti = pack.target
            if ti is None:
                continue
            st = pack.state
            true_target = target_states[ti]
            member_pos = [int_states[g].pos for g in pack.members]
            slots_by_index, heading = pc.formation_slots(
                true_target.pos, true_target.vel, st.last_target_heading,
                params.r_formation)
            st = replace(st, last_target_heading=heading)
            avg_dist = sum(vdist(p, true_target.pos) for p in member_pos) / 4.0
            member_slots = [slots_by_index[st.slot_of_member[m]] for m in range(4)]
            ready = pc.formation_ready(member_pos, member_slots, params.eps_ready)
            d_min_active = (vdist(member_pos[st.active_interceptor], true_target.pos)
                            if st.active_interceptor is not None else math.inf)
            new_st = pc.transition(st, t_next, avg_dist, ready, d_min_active, params,
                                   member_positions=member_pos,
                                   target_pos=true_target.pos,
                                   slots=slots_by_index)
            if new_st.phase is not st.phase:
                result.events.append(PhaseEvent(t_next, pack.pid, pack.episode,
                                                st.phase, new_st.phase))
                result.timeline.append((pack.pid, pack.episode, st.phase.value,
                                        pack.phase_start, t_next))
                pack.phase_start = t_next
            pack.state = new_st

            # 7a. Escape-bound instrumentation during engagement.
            if sc.record_escape_trace and new_st.phase is pc.PackPhase.ENGAGE:
                slots_now, _ = pc.formation_slots(
                    true_target.pos, true_target.vel,
                    new_st.last_target_heading, params.r_formation)
                all_on = all(
                    vdist(int_states[pack.members[m]].pos,
                          slots_now[new_st.slot_of_member[m]]) <= params.eps_ready
                    for m in range(4))
                a_cov = union_covered_area(
                    [int_states[g].pos for g in pack.members],
                    params.r_intercept, mc_samples=sc.escape_mc_samples,
                    mc_seed=(sc.seed * 1000003 + k) % (2 ** 31))
                a_reach = reachable_area(TARGET_LIMITS.v_max, dt)
                bound = escape_bound_from_areas(a_cov, a_reach)
                result.escape_trace.append((t_next, all_on, bound))

        # 7b. Trajectory trace.
        if sc.record_trace:
            for pack in packs:
                for m in range(4):
                    gi = pack.members[m]
                    s = int_states[gi]
                    role = ("striker" if pack.state.active_interceptor == m
                            else "shepherd")
                    result.trace.append((t_next, f"i{gi}", role,
                                         pack.state.phase.value, s.pos, s.vel,
                                         vnorm(s.last_accel)))
            for ti in range(sc.n_targets):
                if not resolved[ti]:
                    s = target_states[ti]
                    result.trace.append((t_next, f"t{ti}", "target",
                                         target_modes[ti].mode.value, s.pos,
                                         s.vel, vnorm(s.last_accel)))

    if n_resolved >= sc.n_targets:
        end_time = max(o.capture_time for o in outcomes)
    else:
        end_time = sc.max_duration
    result.duration = end_time
    for pack in packs:
        if pack.target is not None:
            close_timeline(pack, end_time)
    return result


def _centroid(points: list[Vec3]) -> Vec3:
    n = len(points)
    return (sum(p[0] for p in points) / n,
            sum(p[1] for p in points) / n,
            sum(p[2] for p in points) / n)


def _run_traditional(sc: Scenario) -> TrialResult:
    params = sc.params
    rng_place = _seed_rng(sc.seed, "place")
    target_states, int_states, _anchors = place_initial(sc, rng_place)
    target_rngs = [_seed_rng(sc.seed, f"target:{i}") for i in range(sc.n_targets)]
    target_modes = []
    for i, ts in enumerate(target_states):
        heading = math.atan2(ts.vel[1], ts.vel[0])
        target_modes.append(tb.initial_mode(0.0, heading, target_rngs[i]))
    resolved = [False] * sc.n_targets
    outcomes = [TargetOutcome() for _ in range(sc.n_targets)]
    n_int = len(int_states)
    energy = [0.0] * n_int
    chan_rngs = [_seed_rng(sc.seed, f"chan:{gi // 4}:{gi % 4}") for gi in range(n_int)]
    # Per-interceptor cache of its pursuit target: (tid, pos, vel, update time).
    caches: list[tuple | None] = [None] * n_int

    result = TrialResult(seed=sc.seed, outcomes=outcomes, energy=energy,
                         events=[], timeline=[], duration=0.0)

    def nearest_unresolved(pos: Vec3) -> int | None:
        best = None
        best_d = math.inf
        for ti in range(sc.n_targets):
            if resolved[ti]:
                continue
            d = vdist(pos, target_states[ti].pos)
            if d < best_d:
                best_d = d
                best = ti
        return best

    n_ticks = int(round(sc.max_duration / sc.dt))
    n_resolved = 0
    dt = sc.dt

    for k in range(n_ticks):
        if n_resolved >= sc.n_targets:
            break
        t = k * dt
        t_next = (k + 1) * dt

        # 2. Target-state updates through the lossy channel; each group's
        # member 0 acts as the sensing leader with perfect observation.
        for gi in range(n_int):
            u = chan_rngs[gi].random()
            if sc.comms_enabled:
                leader = gi % 4 == 0 and sc.leader_observes_target
                delivered = leader or u >= sc.loss_prob
            else:
                delivered = True
            cache = caches[gi]
            stale_target = cache is not None and resolved[cache[0]]
            if delivered or cache is None or stale_target:
                # Capture announcements are assumed reliable: retarget with
                # fresh truth whenever the tracked target is resolved.
                ti = nearest_unresolved(int_states[gi].pos)
                if ti is not None:
                    ts = target_states[ti]
                    caches[gi] = (ti, ts.pos, ts.vel, t)
                else:
                    caches[gi] = None

        # 1. Target threat FSMs (threats = interceptors currently tracking it).
        threats_of = [[] for _ in range(sc.n_targets)]
        for gi in range(n_int):
            if caches[gi] is not None:
                threats_of[caches[gi][0]].append(int_states[gi].pos)
        target_cmds = [ZERO] * sc.n_targets
        for ti in range(sc.n_targets):
            if resolved[ti]:
                continue
            tm = tb.update_mode(target_modes[ti], target_states[ti], threats_of[ti], t)
            accel, tm = tb.evasion_accel(tm, target_states[ti], threats_of[ti], t,
                                         target_rngs[ti], TARGET_LIMITS)
            target_modes[ti] = tm
            target_cmds[ti] = reflect_accel_inward(target_states[ti].pos, accel, sc.arena)

        # 3-4. Commands and integration.
        for gi in range(n_int):
            cache = caches[gi]
            if cache is None:
                cmd = ZERO
            else:
                _, cpos, cvel, ct = cache
                age = t - ct
                est = AgentState((cpos[0] + cvel[0] * age,
                                  cpos[1] + cvel[1] * age,
                                  cpos[2] + cvel[2] * age), cvel)
                cmd = pc.traditional_accel(int_states[gi], est, params,
                                           INTERCEPTOR_LIMITS)
            ns = step(int_states[gi], cmd, dt, INTERCEPTOR_LIMITS)
            int_states[gi] = ns
            a = vnorm(ns.last_accel)
            energy[gi] += dt * (ENERGY_HOVER + ENERGY_MANEUVER * a * a)
            _check_limits(ns, INTERCEPTOR_LIMITS, result)
        for ti in range(sc.n_targets):
            if resolved[ti]:
                continue
            target_states[ti] = contain(
                step(target_states[ti], target_cmds[ti], dt, TARGET_LIMITS), sc.arena)

        # 5. Capture detection against each interceptor's pursuit target.
        for gi in range(n_int):
            cache = caches[gi]
            if cache is None:
                continue
            ti = cache[0]
            if resolved[ti]:
                continue
            if vdist(int_states[gi].pos, target_states[ti].pos) <= sc.capture_radius:
                resolved[ti] = True
                n_resolved += 1
                outcomes[ti] = TargetOutcome(True, t_next, gi, TRADITIONAL)

        # 7. Trajectory trace.
        if sc.record_trace:
            for gi in range(n_int):
                s = int_states[gi]
                result.trace.append((t_next, f"i{gi}", TRADITIONAL, TRADITIONAL,
                                     s.pos, s.vel, vnorm(s.last_accel)))
            for ti in range(sc.n_targets):
                if not resolved[ti]:
                    s = target_states[ti]
                    result.trace.append((t_next, f"t{ti}", "target",
                                         target_modes[ti].mode.value, s.pos,
                                         s.vel, vnorm(s.last_accel)))

    if n_resolved >= sc.n_targets:
        result.duration = max(o.capture_time for o in outcomes)
    else:
        result.duration = sc.max_duration
    return result

import math
import itertools
from random import Random

import pytest
from hypothesis import given, strategies as st

from shepherdgrid.kinematics import AgentState, MotionLimits, vdist, vnorm
from shepherdgrid.pack_coordination import (
    PackPhase, PackState, StrategyParams, assign_slots, chase_accel,
    follow_accel, formation_ready, formation_slots, select_active,
    shepherd_accel, slot_position, striker_accel, traditional_accel, transition,
)

PARAMS = StrategyParams()
LIMITS = MotionLimits(v_max=50.0, a_max=15.0)


class TestFormationSlots:
    def test_heading_zero(self):
        slots, heading = formation_slots((0.0, 0.0, 0.0), (35.0, 0.0, 0.0), 0.0, 40.0)
        assert heading == 0.0
        assert slots[0] == pytest.approx((40.0, 0.0, 0.0))
        assert slots[1] == pytest.approx((0.0, 40.0, 0.0))
        assert slots[2] == pytest.approx((-40.0, 0.0, 0.0))
        assert slots[3] == pytest.approx((0.0, -40.0, 0.0))

    def test_heading_north(self):
        slots, heading = formation_slots((100.0, 100.0, 50.0), (0.0, 35.0, 0.0), 0.0, 40.0)
        assert heading == pytest.approx(math.pi / 2)
        assert slots[0] == pytest.approx((100.0, 140.0, 50.0))
        assert slots[1] == pytest.approx((60.0, 100.0, 50.0))
        assert slots[2] == pytest.approx((100.0, 60.0, 50.0))
        assert slots[3] == pytest.approx((140.0, 100.0, 50.0))

    def test_stationary_target_holds_last_heading(self):
        moving, _ = formation_slots((0.0, 0.0, 0.0), (35.0, 0.0, 0.0), 0.0, 40.0)
        still, heading = formation_slots((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.0, 40.0)
        assert heading == 0.0
        assert still == pytest.approx(moving)

    def test_bad_radius_rejected(self):
        with pytest.raises(ValueError):
            formation_slots((0.0, 0.0, 0.0), (35.0, 0.0, 0.0), 0.0, 0.0)

    def test_geometry_properties_random_states(self):
        # Radius, orthogonality of adjacent slots, centroid, and the 10 m
        # minimum shepherd separation over many random target states.
        rng = Random(42)
        for _ in range(1000):
            pos = (rng.uniform(0, 2000), rng.uniform(0, 2000), rng.uniform(0, 500))
            ang = rng.uniform(0, 2 * math.pi)
            speed = rng.uniform(1.0, 35.0)
            vel = (speed * math.cos(ang), speed * math.sin(ang), 0.0)
            slots, _ = formation_slots(pos, vel, 0.0, PARAMS.r_formation)
            cx = cy = cz = 0.0
            for i, s in enumerate(slots):
                assert vdist(s, pos) == pytest.approx(PARAMS.r_formation, abs=1e-9)
                cx += s[0]; cy += s[1]; cz += s[2]
                u = (s[0] - pos[0], s[1] - pos[1])
                nxt = slots[(i + 1) % 4]
                w = (nxt[0] - pos[0], nxt[1] - pos[1])
                assert abs(u[0] * w[0] + u[1] * w[1]) <= 1e-6
                assert vdist(s, nxt) >= 10.0
            assert (cx / 4, cy / 4, cz / 4) == pytest.approx(pos, abs=1e-9)

    def test_rotation_equivariance(self):
        rng = Random(7)
        for _ in range(200):
            pos = (rng.uniform(0, 2000), rng.uniform(0, 2000), rng.uniform(0, 500))
            ang = rng.uniform(0, 2 * math.pi)
            phi = rng.uniform(0, 2 * math.pi)
            vel = (20 * math.cos(ang), 20 * math.sin(ang), 0.0)
            rvel = (20 * math.cos(ang + phi), 20 * math.sin(ang + phi), 0.0)
            base, _ = formation_slots(pos, vel, 0.0, 40.0)
            rotated, _ = formation_slots(pos, rvel, 0.0, 40.0)
            for s, r in zip(base, rotated):
                dx, dy = s[0] - pos[0], s[1] - pos[1]
                want = (pos[0] + dx * math.cos(phi) - dy * math.sin(phi),
                        pos[1] + dx * math.sin(phi) + dy * math.cos(phi), s[2])
                assert r == pytest.approx(want, abs=1e-6)


class TestFormationReady:
    TARGET = (0.0, 0.0, 0.0)

    def slots(self):
        return [slot_position(self.TARGET, 0.0, i, 40.0) for i in range(4)]

    def test_all_on_slots(self):
        slots = self.slots()
        assert formation_ready(slots, slots, 15.0) is True

    def test_three_in_one_far(self):
        slots = self.slots()
        members = slots[:3] + [(500.0, 0.0, 0.0)]
        assert formation_ready(members, slots, 15.0) is True

    def test_two_in_two_out(self):
        slots = self.slots()
        members = slots[:2] + [(500.0, 0.0, 0.0), (0.0, 500.0, 0.0)]
        assert formation_ready(members, slots, 15.0) is False

    def test_truth_table_by_count(self):
        slots = self.slots()
        far = (900.0, 900.0, 0.0)
        for n_in, expected in [(0, False), (1, False), (2, False), (3, True), (4, True)]:
            members = slots[:n_in] + [far] * (4 - n_in)
            assert formation_ready(members, slots, 15.0) is expected


class TestSelectActive:
    def test_argmin(self):
        members = [(50.0, 0, 0), (30.0, 0, 0), (70.0, 0, 0), (90.0, 0, 0)]
        assert select_active(members, (0.0, 0.0, 0.0)) == 1

    def test_tie_breaks_low_index(self):
        members = [(30.0, 0, 0), (0.0, 30.0, 0), (70.0, 0, 0), (90.0, 0, 0)]
        assert select_active(members, (0.0, 0.0, 0.0)) == 0

    def test_all_on_slots_equidistant(self):
        slots = [slot_position((0.0, 0.0, 0.0), 0.3, i, 40.0) for i in range(4)]
        assert select_active(slots, (0.0, 0.0, 0.0)) == 0

    def test_permutation_consistent(self):
        members = [(50.0, 0, 0), (30.0, 0, 0), (70.0, 0, 0), (90.0, 0, 0)]
        target = (0.0, 0.0, 0.0)
        chosen = members[select_active(members, target)]
        for perm in itertools.permutations(members):
            assert perm[select_active(list(perm), target)] == chosen


class TestAssignSlots:
    def test_identity_when_on_slots(self):
        slots = [slot_position((0.0, 0.0, 0.0), 0.0, i, 40.0) for i in range(4)]
        assert assign_slots(slots, slots) == (0, 1, 2, 3)

    def test_minimizes_total_distance(self):
        rng = Random(11)
        for _ in range(50):
            slots = [slot_position((0.0, 0.0, 0.0), rng.uniform(0, 6.28), i, 40.0)
                     for i in range(4)]
            members = [(rng.uniform(-80, 80), rng.uniform(-80, 80), 0.0)
                       for _ in range(4)]
            perm = assign_slots(members, slots)
            assert sorted(perm) == [0, 1, 2, 3]
            cost = sum(vdist(members[m], slots[perm[m]]) for m in range(4))
            best = min(sum(vdist(members[m], slots[p[m]]) for m in range(4))
                       for p in itertools.permutations(range(4)))
            assert cost == pytest.approx(best)


class TestTransition:
    def test_chase_holds_before_minimum_duration(self):
        ps = PackState()
        out = transition(ps, 4.9, 100.0, False, math.inf, PARAMS)
        assert out.phase is PackPhase.CHASE

    def test_chase_to_follow(self):
        ps = PackState()
        out = transition(ps, 5.1, 140.0, False, math.inf, PARAMS)
        assert out.phase is PackPhase.FOLLOW
        assert out.phase_entry_time == 5.1

    def test_chase_holds_when_far(self):
        ps = PackState()
        out = transition(ps, 10.0, 200.0, False, math.inf, PARAMS)
        assert out.phase is PackPhase.CHASE

    def test_follow_to_form_requires_sustained_proximity(self):
        ps = PackState(phase=PackPhase.FOLLOW, phase_entry_time=5.0)
        ps = transition(ps, 6.0, 70.0, False, math.inf, PARAMS)
        assert ps.phase is PackPhase.FOLLOW
        ps = transition(ps, 7.0, 70.0, False, math.inf, PARAMS)
        assert ps.phase is PackPhase.FOLLOW
        ps = transition(ps, 8.0, 70.0, False, math.inf, PARAMS)
        assert ps.phase is PackPhase.FORM

    def test_follow_hold_resets_when_distance_opens(self):
        ps = PackState(phase=PackPhase.FOLLOW, phase_entry_time=5.0)
        ps = transition(ps, 6.0, 70.0, False, math.inf, PARAMS)
        ps = transition(ps, 7.0, 100.0, False, math.inf, PARAMS)
        ps = transition(ps, 8.0, 70.0, False, math.inf, PARAMS)
        assert ps.phase is PackPhase.FOLLOW

    def test_form_to_engage_sets_striker(self):
        ps = PackState(phase=PackPhase.FORM, phase_entry_time=10.0)
        members = [(50.0, 0, 0), (30.0, 0, 0), (70.0, 0, 0), (90.0, 0, 0)]
        out = transition(ps, 12.0, 40.0, True, math.inf, PARAMS,
                         member_positions=members, target_pos=(0.0, 0.0, 0.0))
        assert out.phase is PackPhase.ENGAGE
        assert out.active_interceptor == 1

    def test_engage_regression_after_sustained_collapse(self):
        ps = PackState(phase=PackPhase.ENGAGE, phase_entry_time=20.0,
                       active_interceptor=2)
        ps = transition(ps, 21.0, 40.0, False, 30.0, PARAMS)
        assert ps.phase is PackPhase.ENGAGE  # within the grace window
        ps = transition(ps, 23.0, 40.0, False, 30.0, PARAMS)
        assert ps.phase is PackPhase.ENGAGE
        ps = transition(ps, 24.5, 40.0, False, 30.0, PARAMS)
        assert ps.phase is PackPhase.FORM
        assert ps.active_interceptor is None

    def test_engage_recovery_clears_collapse_timer(self):
        ps = PackState(phase=PackPhase.ENGAGE, phase_entry_time=20.0,
                       active_interceptor=2)
        ps = transition(ps, 21.0, 40.0, False, 30.0, PARAMS)
        ps = transition(ps, 22.0, 40.0, True, 30.0, PARAMS)
        ps = transition(ps, 25.5, 40.0, False, 30.0, PARAMS)
        assert ps.phase is PackPhase.ENGAGE

    def test_random_walk_stays_legal(self):
        legal = {(PackPhase.CHASE, PackPhase.FOLLOW),
                 (PackPhase.FOLLOW, PackPhase.FORM),
                 (PackPhase.FORM, PackPhase.ENGAGE),
                 (PackPhase.ENGAGE, PackPhase.FORM)}
        rng = Random(13)
        ps = PackState()
        t = 0.0
        for _ in range(2000):
            t += 0.1
            out = transition(ps, t, rng.uniform(10.0, 300.0), rng.random() < 0.5,
                             rng.uniform(5.0, 200.0), PARAMS)
            if out.phase is not ps.phase:
                assert (ps.phase, out.phase) in legal
                assert out.phase_entry_time >= ps.phase_entry_time
            ps = out


class TestStrikerAccel:
    def test_predictive_horizon_capped(self):
        striker = AgentState((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
        target = AgentState((200.0, 0.0, 0.0), (0.0, 35.0, 0.0))
        a = striker_accel(striker, target, PARAMS, LIMITS)
        # t_pred = min(3.0, 200/50) = 3.0 -> aim (200, 105, 0).
        want = (200.0, 105.0, 0.0)
        n = vnorm(want)
        assert a == pytest.approx((67.5 * want[0] / n, 67.5 * want[1] / n, 0.0))
        assert vnorm(a) == pytest.approx(LIMITS.a_max * PARAMS.k_strike)

    def test_close_range_direct(self):
        striker = AgentState((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
        target = AgentState((50.0, 0.0, 0.0), (0.0, 35.0, 0.0))
        a = striker_accel(striker, target, PARAMS, LIMITS)
        assert a == pytest.approx((67.5, 0.0, 0.0))

    def test_degenerate_aim_returns_zero(self):
        striker = AgentState((50.0, 0.0, 0.0), (0.0, 0.0, 0.0))
        target = AgentState((50.0, 0.0, 0.0), (0.0, 0.0, 0.0))
        assert striker_accel(striker, target, PARAMS, LIMITS) == (0.0, 0.0, 0.0)


class TestChaseAndTraditional:
    def test_predictive_aim_direction(self):
        member = AgentState((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
        target = AgentState((200.0, 0.0, 0.0), (0.0, 35.0, 0.0))
        a = chase_accel(member, target, PARAMS, LIMITS)
        want = (200.0, 105.0, 0.0)
        n = vnorm(want)
        assert a == pytest.approx((15.0 * want[0] / n, 15.0 * want[1] / n, 0.0))

    def test_stationary_target_pure_pursuit(self):
        member = AgentState((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
        target = AgentState((100.0, 0.0, 0.0), (0.0, 0.0, 0.0))
        a = chase_accel(member, target, PARAMS, LIMITS)
        assert a == pytest.approx((15.0, 0.0, 0.0))

    def test_coincident_zero(self):
        s = AgentState((5.0, 5.0, 5.0), (0.0, 0.0, 0.0))
        assert chase_accel(s, s, PARAMS, LIMITS) == (0.0, 0.0, 0.0)

    def test_traditional_identical_to_chase(self):
        member = AgentState((10.0, -30.0, 5.0), (1.0, 2.0, 0.0))
        target = AgentState((200.0, 100.0, 50.0), (-10.0, 35.0, 0.0))
        assert traditional_accel(member, target, PARAMS, LIMITS) == \
            chase_accel(member, target, PARAMS, LIMITS)

    def test_two_members_share_aim_point(self):
        # Both far enough out that the horizon caps at 3 s, so both aim at
        # the same predicted intercept point (500, 105, 0).
        target = AgentState((500.0, 0.0, 0.0), (0.0, 35.0, 0.0))
        aim = (500.0, 105.0, 0.0)
        for pos in [(0.0, 0.0, 0.0), (0.0, 50.0, 0.0)]:
            member = AgentState(pos, (0.0, 0.0, 0.0))
            a = traditional_accel(member, target, PARAMS, LIMITS)
            assert math.atan2(a[1], a[0]) == pytest.approx(
                math.atan2(aim[1] - pos[1], aim[0] - pos[0]))


class TestFollowAccel:
    def test_equilibrium_at_standoff(self):
        target = AgentState((100.0, 0.0, 0.0), (35.0, 0.0, 0.0))
        member = AgentState((40.0, 0.0, 0.0), (35.0, 0.0, 0.0))
        a = follow_accel(member, target, PARAMS)
        assert vnorm(a) == pytest.approx(0.0, abs=1e-9)

    def test_pull_toward_when_trailing_far(self):
        target = AgentState((100.0, 0.0, 0.0), (35.0, 0.0, 0.0))
        member = AgentState((0.0, 0.0, 0.0), (35.0, 0.0, 0.0))
        a = follow_accel(member, target, PARAMS)
        assert a == pytest.approx((PARAMS.k_vel * PARAMS.k_radial * 40.0, 0.0, 0.0))

    def test_push_away_when_too_close(self):
        target = AgentState((100.0, 0.0, 0.0), (35.0, 0.0, 0.0))
        member = AgentState((80.0, 0.0, 0.0), (35.0, 0.0, 0.0))
        a = follow_accel(member, target, PARAMS)
        assert a[0] < 0.0


class TestShepherdAccel:
    def setup_method(self):
        self.target = AgentState((0.0, 0.0, 0.0), (35.0, 0.0, 0.0))
        self.slot = slot_position(self.target.pos, 0.0, 0, PARAMS.r_formation)

    def test_zero_accel_when_tracking(self):
        member = AgentState(self.slot, (35.0, 30.0, 0.0))
        a = shepherd_accel(member, self.slot, 0, 0.0, self.target, PARAMS, LIMITS)
        assert a == pytest.approx((0.0, 0.0, 0.0), abs=1e-9)

    def test_accelerates_toward_desired_velocity_from_rest(self):
        member = AgentState(self.slot, (0.0, 0.0, 0.0))
        a = shepherd_accel(member, self.slot, 0, 0.0, self.target, PARAMS, LIMITS)
        assert a == pytest.approx((70.0, 60.0, 0.0))

    def test_stationary_target_pure_orbit(self):
        target = AgentState((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
        member = AgentState(self.slot, (0.0, 30.0, 0.0))
        a = shepherd_accel(member, self.slot, 0, 0.0, target, PARAMS, LIMITS)
        assert a == pytest.approx((0.0, 0.0, 0.0), abs=1e-9)

    def test_speed_floor_enforced(self):
        # Force a tiny desired velocity: member well ahead of its slot so the
        # correction opposes the orbit term.
        rng = Random(21)
        for _ in range(500):
            target_vel = (rng.uniform(-35, 35), rng.uniform(-35, 35), 0.0)
            target = AgentState((0.0, 0.0, 0.0), target_vel)
            member = AgentState((rng.uniform(-60, 60), rng.uniform(-60, 60), 0.0),
                                (rng.uniform(-50, 50), rng.uniform(-50, 50), 0.0))
            heading = rng.uniform(0, 2 * math.pi)
            slot = slot_position(target.pos, heading, 1, PARAMS.r_formation)
            a = shepherd_accel(member, slot, 1, heading, target, PARAMS, LIMITS)
            v_des = (member.vel[0] + a[0] / PARAMS.k_vel,
                     member.vel[1] + a[1] / PARAMS.k_vel,
                     member.vel[2] + a[2] / PARAMS.k_vel)
            assert vnorm(v_des) >= vnorm(target.vel) + PARAMS.v_margin - 1e-6

    def test_orbit_equilibrium_offset_within_tolerance(self):
        # At steady state the slot correction balances the orbit term, so the
        # standing offset is v_orbit / k_slot; it must sit inside eps_ready or
        # readiness could never latch.
        assert PARAMS.v_orbit / PARAMS.k_slot < PARAMS.eps_ready


class TestStrategyParams:
    def test_defaults_validated(self):
        p = StrategyParams()
        assert p.tau_chase == 5.0
        assert p.eps_ready == 15.0
        assert p.r_formation == 40.0
        assert p.v_orbit == 30.0
        assert p.k_strike == 4.5
        assert p.tau_horizon == 3.0
        assert p.r_intercept == 25.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            StrategyParams(tau_chase=0.0)

    def test_rejects_eps_ready_at_radius(self):
        with pytest.raises(ValueError):
            StrategyParams(eps_ready=40.0, r_formation=40.0)

"""Vehicle state, vector helpers, and fixed-step integration with saturation.

Vectors are plain (x, y, z) float tuples: the hot simulation loop calls these
functions millions of times per batch and small-tuple arithmetic is much
cheaper than per-agent numpy arrays on a single core.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

Vec3 = tuple[float, float, float]

ZERO: Vec3 = (0.0, 0.0, 0.0)


class InvalidStateError(ValueError):
    """A vehicle state or command contains NaN/Inf."""


def vadd(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def vsub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def vscale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def vdot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def vnorm(a: Vec3) -> float:
    # hypot keeps full precision when component squares would under/overflow.
    return math.hypot(a[0], a[1], a[2])


def vdist(a: Vec3, b: Vec3) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2])


def vunit(a: Vec3) -> Vec3:
    """Unit vector; the zero vector maps to itself."""
    n = vnorm(a)
    if n == 0.0:
        return ZERO
    return (a[0] / n, a[1] / n, a[2] / n)


def vfinite(a: Vec3) -> bool:
    return math.isfinite(a[0]) and math.isfinite(a[1]) and math.isfinite(a[2])


def clamp_magnitude(v: Vec3, max_mag: float) -> Vec3:
    """Scale v down to magnitude max_mag if it exceeds it; direction preserved."""
    if max_mag < 0:
        raise ValueError(f"max_mag must be >= 0, got {max_mag}")
    n = vnorm(v)
    if n <= max_mag:
        return v
    s = max_mag / n
    return (v[0] * s, v[1] * s, v[2] * s)


@dataclass(frozen=True)
class MotionLimits:
    v_max: float  # m/s
    a_max: float  # m/s^2

    def __post_init__(self):
        if not (self.v_max > 0 and self.a_max > 0):
            raise ValueError("motion limits must be positive")


@dataclass(frozen=True)
class AgentState:
    pos: Vec3
    vel: Vec3
    last_accel: Vec3 = ZERO


def step(state: AgentState, accel_cmd: Vec3, dt: float, limits: MotionLimits) -> AgentState:
    """One semi-implicit Euler step with acceleration-then-velocity saturation.

    A z >= 0 altitude floor is enforced by clamping position to the ground
    plane and zeroing any remaining downward velocity.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not (vfinite(state.pos) and vfinite(state.vel) and vfinite(accel_cmd)):
        raise InvalidStateError(f"non-finite state or command: {state}, {accel_cmd}")
    a = clamp_magnitude(accel_cmd, limits.a_max)
    vel = clamp_magnitude(vadd(state.vel, vscale(a, dt)), limits.v_max)
    pos = vadd(state.pos, vscale(vel, dt))
    if pos[2] < 0.0:
        pos = (pos[0], pos[1], 0.0)
        if vel[2] < 0.0:
            vel = (vel[0], vel[1], 0.0)
    return AgentState(pos, vel, a)


def reflect_accel_inward(pos: Vec3, accel: Vec3, arena: Vec3, margin: float = 100.0) -> Vec3:
    """Reflect outward acceleration components inward near arena boundaries.

    Applied to the target's commanded acceleration within `margin` of any of
    the six arena faces; interceptors are not bounded.
    """
    ax, ay, az = accel
    for i, extent in enumerate(arena):
        c = pos[i]
        comp = accel[i]
        if c < margin and comp < 0.0:
            comp = -comp
        elif c > extent - margin and comp > 0.0:
            comp = -comp
        if i == 0:
            ax = comp
        elif i == 1:
            ay = comp
        else:
            az = comp
    return (ax, ay, az)


def contain(state: AgentState, arena: Vec3) -> AgentState:
    """Hard arena containment: clamp position to the box, zero outward velocity.

    Last-resort guard behind reflect_accel_inward, so a fleeing target can
    never leave the operational volume.
    """
    px, py, pz = state.pos
    vx, vy, vz = state.vel
    changed = False
    for i, extent in enumerate(arena):
        c = state.pos[i]
        if c < 0.0:
            changed = True
            if i == 0:
                px, vx = 0.0, max(0.0, vx)
            elif i == 1:
                py, vy = 0.0, max(0.0, vy)
            else:
                pz, vz = 0.0, max(0.0, vz)
        elif c > extent:
            changed = True
            if i == 0:
                px, vx = extent, min(0.0, vx)
            elif i == 1:
                py, vy = extent, min(0.0, vy)
            else:
                pz, vz = extent, min(0.0, vz)
    if not changed:
        return state
    return AgentState((px, py, pz), (vx, vy, vz), state.last_accel)

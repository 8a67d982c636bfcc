"""Lossy intra-pack communication, dead reckoning, and autonomous fallback.

Once per tick the pack leader (member 0, assumed to own the target sensor)
broadcasts the target state and the pack's coordination data. Each other
member receives it independently with probability 1 - loss_prob. Members act
on their cached copy, dead-reckoning the target between deliveries, and drop
to autonomous pursuit once the cache is older than the staleness limit.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from random import Random

from .kinematics import Vec3
from .pack_coordination import PackPhase

STALENESS_LIMIT = 3.0  # s, cache age beyond which a member goes autonomous


class FallbackMode(Enum):
    COORDINATED = "coordinated"
    AUTONOMOUS = "autonomous"


@dataclass(frozen=True)
class ChannelParams:
    loss_prob: float = 0.0
    latency_ticks: int = 0  # reserved; latency is not modeled yet

    def __post_init__(self):
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")
        if self.latency_ticks != 0:
            raise NotImplementedError("message latency is not modeled")


@dataclass
class TrackMemory:
    last_target_pos: Vec3
    last_target_vel: Vec3
    last_update_time: float
    last_phase: PackPhase
    last_slot: int
    last_active_flag: bool
    last_heading: float = 0.0


def broadcast_tick(loss_prob: float, member_rngs: list[Random]) -> list[bool]:
    """Per-member Bernoulli delivery flags for one leader broadcast.

    Each member's flag comes from its own rng stream, so delivery patterns
    are deterministic per (seed, member, tick) and independent across members.
    """
    return [rng.random() >= loss_prob for rng in member_rngs]


def dead_reckon(mem: TrackMemory, t: float) -> tuple[Vec3, Vec3]:
    """Constant-velocity extrapolation of the cached target state to time t."""
    age = t - mem.last_update_time
    p = mem.last_target_pos
    v = mem.last_target_vel
    return (p[0] + v[0] * age, p[1] + v[1] * age, p[2] + v[2] * age), v


def fallback_mode(mem: TrackMemory, t: float,
                  staleness_limit: float = STALENESS_LIMIT) -> FallbackMode:
    """Autonomous iff the cache is strictly older than the staleness limit."""
    if t - mem.last_update_time > staleness_limit:
        return FallbackMode.AUTONOMOUS
    return FallbackMode.COORDINATED

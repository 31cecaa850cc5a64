"""Correlated random-walk UE mobility confined to the serving cell disc."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from oran_dsa.radio import RuConfig

DEFAULT_MAX_TURN = math.pi / 8


def wrap_angle(theta: float) -> float:
    """Map an angle to [-pi, pi)."""
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class MobilityState:
    x: float
    y: float
    heading: float
    speed: float

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


def reflect_at_boundary(
    pos: tuple[float, float], ru: RuConfig, heading: float
) -> tuple[tuple[float, float], float]:
    """Pull a point that left the RU disc back onto the rim and reverse its heading."""
    cx, cy = ru.position
    dx, dy = pos[0] - cx, pos[1] - cy
    dist = math.hypot(dx, dy)
    if dist <= ru.radius_m:
        return pos, heading
    scale = ru.radius_m / dist
    x, y = cx + dx * scale, cy + dy * scale
    # rounding can leave the projected point a few ulps outside
    while math.hypot(x - cx, y - cy) > ru.radius_m:
        scale *= 1.0 - 1e-12
        x, y = cx + dx * scale, cy + dy * scale
    return (x, y), wrap_angle(heading + math.pi)


def step(
    state: MobilityState,
    dt: float,
    max_turn: float,
    rng: np.random.Generator,
    ru: RuConfig | None = None,
) -> MobilityState:
    """Advance one update: turn by U(-max_turn, max_turn), then move ``speed*dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    heading = wrap_angle(state.heading + rng.uniform(-max_turn, max_turn))
    x = state.x + state.speed * dt * math.cos(heading)
    y = state.y + state.speed * dt * math.sin(heading)
    if ru is not None:
        (x, y), heading = reflect_at_boundary((x, y), ru, heading)
    return MobilityState(x, y, heading, state.speed)


def uniform_in_disc(ru: RuConfig, rng: np.random.Generator) -> tuple[float, float]:
    r = ru.radius_m * math.sqrt(rng.uniform())
    phi = rng.uniform(-math.pi, math.pi)
    return ru.position[0] + r * math.cos(phi), ru.position[1] + r * math.sin(phi)

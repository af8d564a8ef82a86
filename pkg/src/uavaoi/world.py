"""Entities, stochastic kinematics and Age-of-Information bookkeeping.

Everything here is a pure function of its inputs. ``WorldState`` carries its
own ``numpy.random.Generator``; callers that advance the world copy it first
(see :func:`uavaoi.mmdp.env_step`).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractViolation

V_MIN = 0.0
V_MAX = 15.0
ALTITUDE = 120.0


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned rectangle in meters."""

    x_min: float = 0.0
    x_max: float = 200.0
    y_min: float = 0.0
    y_max: float = 200.0

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2])

    def clamp(self, p: np.ndarray) -> np.ndarray:
        return np.array([min(max(p[0], self.x_min), self.x_max),
                         min(max(p[1], self.y_min), self.y_max)])

    def contains(self, p) -> bool:
        return self.x_min <= p[0] <= self.x_max and self.y_min <= p[1] <= self.y_max

    def normalize(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.stack([(p[..., 0] - self.x_min) / self.width,
                         (p[..., 1] - self.y_min) / self.height], axis=-1)


@dataclass(frozen=True, eq=False)
class UavState:
    id: int
    position: np.ndarray  # (x, y) m
    velocity: np.ndarray  # (vx, vy) m/s
    altitude: float = ALTITUDE

    @property
    def position3(self) -> np.ndarray:
        return np.array([self.position[0], self.position[1], self.altitude])


@dataclass(frozen=True, eq=False)
class SensorState:
    id: int
    position: np.ndarray  # (x, y), ground level
    aoi: float


@dataclass(frozen=True, eq=False)
class WorldState:
    time: float
    step_index: int
    uavs: tuple
    sensors: tuple
    rng: np.random.Generator
    dt: float = 1.0
    sigma: float = 0.0
    bounds: Bounds = field(default_factory=Bounds)
    v_min: float = V_MIN
    v_max: float = V_MAX
    # One HybridAction per UAV from the previous step, or None right after reset.
    last_actions: tuple | None = None
    # Scenario configuration (an ``mmdp.EnvConfig``) shared by every step.
    config: object = None

    def aois(self) -> np.ndarray:
        return np.array([s.aoi for s in self.sensors])

    def uav_positions(self) -> np.ndarray:
        return np.array([u.position for u in self.uavs]).reshape(-1, 2)

    def uav_velocities(self) -> np.ndarray:
        return np.array([u.velocity for u in self.uavs]).reshape(-1, 2)

    def sensor_positions(self) -> np.ndarray:
        return np.array([s.position for s in self.sensors]).reshape(-1, 2)

    def same_as(self, other: "WorldState") -> bool:
        """Bit-exact comparison of the physical state and RNG state."""
        return (
            self.time == other.time
            and self.step_index == other.step_index
            and np.array_equal(self.uav_positions(), other.uav_positions())
            and np.array_equal(self.uav_velocities(), other.uav_velocities())
            and np.array_equal(self.sensor_positions(), other.sensor_positions())
            and np.array_equal(self.aois(), other.aois())
            and self.rng.bit_generator.state == other.rng.bit_generator.state
        )


def clamp_speed(v_cmd, v_min: float = V_MIN, v_max: float = V_MAX) -> np.ndarray:
    """Rescale ``v_cmd`` so its norm lies in ``[v_min, v_max]``.

    The direction is kept. A zero command stays zero even when ``v_min > 0``,
    since it has no direction to scale along.
    """
    if not v_max > v_min >= 0:
        raise ContractViolation(f"need v_max > v_min >= 0, got [{v_min}, {v_max}]")
    v = np.asarray(v_cmd, dtype=float)
    speed = float(np.hypot(v[0], v[1]))
    if speed == 0.0:
        return np.zeros(2)
    if speed > v_max:
        return v * (v_max / speed)
    if speed < v_min:
        # divide first: v_min / speed overflows for subnormal commands
        return (v / speed) * v_min
    return v.copy()


def step_kinematics(uav: UavState, v_cmd, dt: float, sigma: float, noise,
                    bounds: Bounds | None = None) -> UavState:
    """One Euler-Maruyama step of ``dζ = v dt + σ dW``.

    ``noise`` holds two standard-normal draws. The result is clamped to
    ``bounds`` when given.
    """
    if dt <= 0:
        raise ContractViolation(f"dt must be positive, got {dt}")
    v = np.asarray(v_cmd, dtype=float)
    pos = uav.position + v * dt + sigma * np.sqrt(dt) * np.asarray(noise, dtype=float)
    if bounds is not None:
        pos = bounds.clamp(pos)
    return replace(uav, position=pos, velocity=v.copy())


def advance_aoi(sensors: Sequence[SensorState], served: Iterable[int], dt: float) -> tuple:
    """Grow every sensor's AoI by ``dt``; served sensors restart at ``dt``.

    Serving is generate-at-will: a fresh sample is taken at the collection
    instant, so a served sensor ends the step one ``dt`` old. Serving the same
    sensor twice in a step has the same effect as serving it once.
    """
    served = set(served)
    ids = {s.id for s in sensors}
    unknown = served - ids
    if unknown:
        raise ContractViolation(f"unknown sensor ids in served set: {sorted(unknown)}")
    return tuple(
        replace(s, aoi=dt if s.id in served else s.aoi + dt) for s in sensors
    )


def average_aoi(world: WorldState) -> float:
    """Mean AoI over sensors, which is the per-step cost."""
    if not world.sensors:
        raise ContractViolation("average_aoi needs at least one sensor")
    return float(np.mean(world.aois()))

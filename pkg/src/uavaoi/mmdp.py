"""Multi-UAV data-collection environment.

Each step every UAV picks one sensor and a waypoint offset plus speed. It flies
toward the waypoint, beacons the chosen sensor and, if the link succeeds,
collects a fresh sample. Beacon, upload and acknowledgement all happen within
the step. The shared cost is the average AoI after the step; learners use
``reward = -cost``.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import ChannelParams, Outcome, path_loss, transmission_outcome
from .errors import ConfigError, ContractViolation
from .meanfield import MeanFieldObservation, neighbor_mean_field
from .scenario import generate_scenario
from .world import (ALTITUDE, V_MAX, V_MIN, Bounds, SensorState, UavState, WorldState,
                    advance_aoi, average_aoi, clamp_speed, step_kinematics)


@dataclass(frozen=True)
class EnvConfig:
    n_uavs: int = 3
    n_sensors: int = 12
    bounds: Bounds = field(default_factory=Bounds)
    altitude: float = ALTITUDE
    dt: float = 1.0
    sigma: float = 0.0
    v_min: float = V_MIN
    v_max: float = V_MAX
    delta_max: float | None = None  # waypoint offset bound, defaults to v_max * dt
    channel: ChannelParams = field(default_factory=ChannelParams)
    sensor_distribution: str = "uniform"
    aoi_scale: float | None = None  # AoI normaliser, defaults to 40 * dt
    neighbor_radius: float | None = None

    def __post_init__(self):
        if self.n_uavs < 1:
            raise ConfigError("need at least one UAV")
        if self.n_sensors < 1:
            raise ConfigError("need at least one sensor")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if not self.v_max > self.v_min >= 0:
            raise ConfigError("need v_max > v_min >= 0")
        if self.altitude <= 0:
            raise ConfigError("altitude must be positive")

    @property
    def offset_bound(self) -> float:
        return self.v_max * self.dt if self.delta_max is None else self.delta_max

    @property
    def aoi_norm(self) -> float:
        return 40.0 * self.dt if self.aoi_scale is None else self.aoi_scale

    @property
    def obs_dim(self) -> int:
        return 2 + self.n_sensors + 5 + self.n_sensors


@dataclass(frozen=True)
class HybridAction:
    sensor_index: int
    waypoint_offset: tuple = (0.0, 0.0)
    speed: float = 0.0


@dataclass(frozen=True, eq=False)
class Observation:
    own_pos: np.ndarray
    sensor_aoi: np.ndarray
    mean_field: MeanFieldObservation
    vector: np.ndarray


def _config(world: WorldState) -> EnvConfig:
    cfg = world.config
    if not isinstance(cfg, EnvConfig):
        raise ContractViolation("world was not created by mmdp.reset")
    return cfg


def encode_observation(world: WorldState, agent: int, mf: MeanFieldObservation,
                       config: EnvConfig | None = None) -> np.ndarray:
    """Feature vector ``[own_pos(2) | aoi(J) | mf_pos(2) | mf_vel(2) | mf_sched(J) | count(1)]``."""
    cfg = config or _config(world)
    own = world.bounds.normalize(world.uavs[agent].position)
    aoi = world.aois() / cfg.aoi_norm
    return np.concatenate([own, aoi, mf.features(world.bounds, world.v_max, len(world.uavs) - 1)])


def observe(world: WorldState) -> list[Observation]:
    cfg = _config(world)
    out = []
    for i in range(len(world.uavs)):
        mf = neighbor_mean_field(i, world, world.last_actions, cfg.neighbor_radius)
        vec = encode_observation(world, i, mf, cfg)
        out.append(Observation(vec[:2], vec[2:2 + cfg.n_sensors], mf, vec))
    return out


def reset(config: EnvConfig, seed, sensor_positions=None) -> tuple[WorldState, list[Observation]]:
    """Fresh world: UAVs uniform over the area at rest, every AoI equal to ``dt``.

    Sensor positions come from ``sensor_positions`` when given (a fixed
    scenario reused across episodes), otherwise from the configured
    distribution using the same seed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    b = config.bounds
    if sensor_positions is None:
        sensor_positions = generate_scenario(config.sensor_distribution, config.n_sensors, b, rng)
    sensor_positions = np.asarray(sensor_positions, dtype=float)
    if sensor_positions.shape != (config.n_sensors, 2):
        raise ConfigError(f"expected {config.n_sensors} sensor positions, got {sensor_positions.shape}")
    lo = np.array([b.x_min, b.y_min])
    size = np.array([b.width, b.height])
    uav_pos = lo + rng.uniform(size=(config.n_uavs, 2)) * size
    uavs = tuple(UavState(i, uav_pos[i], np.zeros(2), config.altitude) for i in range(config.n_uavs))
    sensors = tuple(SensorState(j, sensor_positions[j].copy(), config.dt)
                    for j in range(config.n_sensors))
    world = WorldState(0.0, 0, uavs, sensors, rng, config.dt, config.sigma, b,
                       config.v_min, config.v_max, None, config)
    return world, observe(world)


def _check_action(a, n_sensors: int) -> None:
    if not isinstance(a, HybridAction):
        raise ContractViolation(f"expected HybridAction, got {type(a).__name__}")
    if not (isinstance(a.sensor_index, (int, np.integer)) and 0 <= a.sensor_index < n_sensors):
        raise ContractViolation(f"sensor_index {a.sensor_index!r} not in [0, {n_sensors})")
    off = np.asarray(a.waypoint_offset, dtype=float)
    if off.shape != (2,) or not np.all(np.isfinite(off)) or not np.isfinite(a.speed):
        raise ContractViolation(f"malformed continuous action {a!r}")


def command_velocity(action: HybridAction, cfg: EnvConfig) -> np.ndarray:
    """Velocity toward ``position + offset`` at the clamped speed."""
    bound = cfg.offset_bound
    off = np.clip(np.asarray(action.waypoint_offset, dtype=float), -bound, bound)
    speed = min(max(float(action.speed), cfg.v_min), cfg.v_max)
    norm = float(np.hypot(off[0], off[1]))
    if norm == 0.0:
        return np.zeros(2)
    return clamp_speed(off / norm * speed, cfg.v_min, cfg.v_max)


def collect(world: WorldState, uavs: Sequence[UavState], sensor_indices: Sequence[int]) -> tuple:
    """Run the beacon/upload exchange for each UAV and age the sensors.

    Returns the new sensor tuple. A sensor is refreshed when at least one UAV
    that scheduled it has a successful link.
    """
    cfg = _config(world)
    served = set()
    for uav, j in zip(uavs, sensor_indices):
        sensor = world.sensors[j]
        loss = path_loss(uav.position3, (sensor.position[0], sensor.position[1], 0.0), cfg.channel)
        if transmission_outcome(loss, cfg.channel) is Outcome.SUCCESS:
            served.add(sensor.id)
    return advance_aoi(world.sensors, served, world.dt)


def env_step(world: WorldState, joint_actions: Sequence[HybridAction]):
    """Advance one step. Returns ``(world', observations, cost)``; ``world`` is untouched."""
    cfg = _config(world)
    if len(joint_actions) != len(world.uavs):
        raise ContractViolation(f"need {len(world.uavs)} actions, got {len(joint_actions)}")
    for a in joint_actions:
        _check_action(a, len(world.sensors))
    rng = copy.deepcopy(world.rng)
    uavs = []
    for uav, a in zip(world.uavs, joint_actions):
        noise = rng.standard_normal(2)
        uavs.append(step_kinematics(uav, command_velocity(a, cfg), world.dt, world.sigma,
                                    noise, world.bounds))
    sensors = collect(world, uavs, [a.sensor_index for a in joint_actions])
    new = replace(world, time=(world.step_index + 1) * world.dt, step_index=world.step_index + 1,
                  uavs=tuple(uavs), sensors=sensors, rng=rng, last_actions=tuple(joint_actions))
    return new, observe(new), average_aoi(new)

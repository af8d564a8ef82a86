"""Air-to-ground channel: LoS probability, elevation angle and path loss.

The path loss follows the usual probabilistic LoS/NLoS mix on top of free-space
loss. Distances use the slant range of each UAV-sensor link.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractViolation

ALWAYS_SUCCEED = "always-succeed"
THRESHOLD = "threshold"


@dataclass(frozen=True)
class ChannelParams:
    a: float = 9.61
    b: float = 0.16
    eta_los: float = 1.0  # dB
    eta_nlos: float = 20.0  # dB
    carrier_freq: float = 2e9  # Hz
    light_speed: float = 299_792_458.0  # m/s
    coverage_radius: float = 500.0  # m, informational only
    loss_threshold: float = 100.0  # dB
    mode: str = ALWAYS_SUCCEED

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigError(f"channel a must be > 0, got {self.a}")
        if not self.b >= 0:
            raise ConfigError(f"channel b must be >= 0, got {self.b}")
        if not self.eta_nlos >= self.eta_los:
            raise ConfigError("eta_nlos must be >= eta_los")
        if not self.carrier_freq > 0:
            raise ConfigError("carrier_freq must be > 0")
        if self.mode not in (ALWAYS_SUCCEED, THRESHOLD):
            raise ConfigError(f"unknown channel mode {self.mode!r}")


def _split(uav_pos, sensor_pos):
    u = np.asarray(uav_pos, dtype=float)
    s = np.asarray(sensor_pos, dtype=float)
    h = float(u[2]) - (float(s[2]) if s.shape[0] > 2 else 0.0)
    if not h > 0:
        raise ContractViolation(f"UAV must be above the sensor, got height {h}")
    d = float(np.hypot(u[0] - s[0], u[1] - s[1]))
    return h, d


def elevation_angle(uav_pos, sensor_pos) -> float:
    """Elevation angle in radians; pi/2 when the UAV is directly overhead."""
    h, d = _split(uav_pos, sensor_pos)
    if d == 0.0:
        return math.pi / 2
    return math.atan(h / d)


def los_probability(phi, params: ChannelParams):
    """LoS probability for an elevation angle ``phi`` given in degrees."""
    return 1.0 / (1.0 + params.a * np.exp(-params.b * (np.asarray(phi, dtype=float) - params.a)))


def path_loss(uav_pos, sensor_pos, params: ChannelParams) -> float:
    """Mean path loss in dB of the link between a UAV and a ground sensor."""
    h, d = _split(uav_pos, sensor_pos)
    phi = math.pi / 2 if d == 0.0 else math.atan(h / d)
    slant = h if d == 0.0 else math.hypot(d, h)
    p_los = float(los_probability(math.degrees(phi), params))
    return (
        p_los * (params.eta_los - params.eta_nlos)
        + 20.0 * math.log10(slant)
        + 20.0 * math.log10(params.carrier_freq)
        + 20.0 * math.log10(4.0 * math.pi / params.light_speed)
        + params.eta_nlos
    )


class Outcome(enum.Enum):
    SUCCESS = "success"
    RETRY = "retry"


def transmission_outcome(loss: float, params: ChannelParams) -> Outcome:
    if params.mode == ALWAYS_SUCCEED or loss <= params.loss_threshold:
        return Outcome.SUCCESS
    return Outcome.RETRY

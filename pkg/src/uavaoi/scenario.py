"""Ground-sensor layouts: uniform, normal and jittered square lattice."""
from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, ContractViolation
from .world import Bounds

DISTRIBUTIONS = ("uniform", "square", "normal")
SQUARE_JITTER = 0.02  # fraction of a lattice cell


def generate_scenario(distribution: str, n_sensors: int, bounds: Bounds, seed) -> np.ndarray:
    """Sensor (x, y) positions, shape ``(n_sensors, 2)``.

    ``normal`` centres an isotropic Gaussian on the area with a standard
    deviation of one sixth of each side and redraws points that land outside.
    ``square`` places points row by row on a ``ceil(sqrt(J))``-wide lattice of
    cell centres and jitters each by up to 2% of a cell.
    """
    if n_sensors < 1:
        raise ContractViolation("need at least one sensor")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lo = np.array([bounds.x_min, bounds.y_min])
    size = np.array([bounds.width, bounds.height])
    if distribution == "uniform":
        return lo + rng.uniform(0.0, 1.0, size=(n_sensors, 2)) * size
    if distribution == "normal":
        std = size / 6.0
        out = np.empty((n_sensors, 2))
        filled = 0
        while filled < n_sensors:
            draw = rng.normal(bounds.center, std, size=(n_sensors - filled, 2))
            ok = np.all((draw >= lo) & (draw <= lo + size), axis=1)
            keep = draw[ok]
            out[filled:filled + len(keep)] = keep
            filled += len(keep)
        return out
    if distribution == "square":
        cols = math.ceil(math.sqrt(n_sensors))
        rows = math.ceil(n_sensors / cols)
        cell = size / np.array([cols, rows])
        k = np.arange(n_sensors)
        centers = lo + (np.stack([k % cols, k // cols], axis=1) + 0.5) * cell
        jitter = rng.uniform(-SQUARE_JITTER, SQUARE_JITTER, size=(n_sensors, 2)) * cell
        return centers + jitter
    raise ConfigError(f"unknown sensor distribution {distribution!r}; pick one of {DISTRIBUTIONS}")

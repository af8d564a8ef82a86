"""Mean-field quantities: empirical density, neighbour averages and FPK checks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation
from .world import Bounds, WorldState

MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Probability mass per cell on a regular ``nx`` by ``ny`` grid.

    ``mass[i, j]`` belongs to the cell whose x index is ``i`` and y index ``j``.
    """

    bounds: Bounds
    mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.ndim != 2:
            raise ContractViolation(f"mass must be 2-D, got shape {m.shape}")
        if np.any(m < 0):
            raise ContractViolation("mass entries must be nonnegative")
        total = m.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise ContractViolation(f"mass must sum to 1, got {total!r}")
        object.__setattr__(self, "mass", m)

    @property
    def nx(self) -> int:
        return self.mass.shape[0]

    @property
    def ny(self) -> int:
        return self.mass.shape[1]

    @property
    def spacing(self) -> tuple[float, float]:
        return self.bounds.width / self.nx, self.bounds.height / self.ny

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        hx, hy = self.spacing
        xs = self.bounds.x_min + hx * (np.arange(self.nx) + 0.5)
        ys = self.bounds.y_min + hy * (np.arange(self.ny) + 0.5)
        return xs, ys

    def density(self) -> np.ndarray:
        hx, hy = self.spacing
        return self.mass / (hx * hy)


@dataclass(frozen=True, eq=False)
class MeanFieldObservation:
    """Neighbour averages seen by one agent, in physical units.

    ``mean_schedule`` is the average one-hot of the neighbours' last scheduled
    sensors; it is all zeros when there are no neighbours or no previous
    actions yet.
    """

    mean_neighbor_pos: np.ndarray
    mean_neighbor_vel: np.ndarray
    mean_schedule: np.ndarray
    neighbor_count: int

    def features(self, bounds: Bounds, v_max: float, max_neighbors: int) -> np.ndarray:
        """Flat normalised vector: pos(2), vel(2), schedule(J), count(1)."""
        if self.neighbor_count:
            pos = bounds.normalize(self.mean_neighbor_pos)
        else:
            pos = np.zeros(2)
        vel = self.mean_neighbor_vel / v_max
        count = self.neighbor_count / max(max_neighbors, 1)
        return np.concatenate([pos, vel, self.mean_schedule, [count]])


def empirical_density(positions, bounds: Bounds, nx: int, ny: int) -> DensityGrid:
    """Histogram of positions normalised by the population size."""
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = p.shape[0]
    if n < 1:
        raise ContractViolation("empirical_density needs at least one position")
    inside = ((p[:, 0] >= bounds.x_min) & (p[:, 0] <= bounds.x_max)
              & (p[:, 1] >= bounds.y_min) & (p[:, 1] <= bounds.y_max))
    if not inside.all():
        bad = p[~inside][0]
        raise ContractViolation(f"position {tuple(bad)} lies outside {bounds}")
    hx, hy = bounds.width / nx, bounds.height / ny
    ix = np.minimum(((p[:, 0] - bounds.x_min) / hx).astype(int), nx - 1)
    iy = np.minimum(((p[:, 1] - bounds.y_min) / hy).astype(int), ny - 1)
    counts = np.zeros((nx, ny))
    np.add.at(counts, (ix, iy), 1.0)
    return DensityGrid(bounds, counts / n)


def neighbor_mean_field(agent: int, world: WorldState, last_actions=None,
                        radius: float | None = None) -> MeanFieldObservation:
    """Average the neighbours' positions, velocities and last schedules.

    Neighbours are all other UAVs, or only those within ``radius`` meters
    (horizontal distance) when a radius is given.
    """
    n_uav = len(world.uavs)
    if not 0 <= agent < n_uav:
        raise ContractViolation(f"agent {agent} does not exist (have {n_uav} UAVs)")
    n_sensors = len(world.sensors)
    pos = world.uav_positions()
    vel = world.uav_velocities()
    others = np.array([k for k in range(n_uav) if k != agent], dtype=int)
    if radius is not None and others.size:
        d = np.hypot(*(pos[others] - pos[agent]).T)
        others = others[d <= radius]
    schedule = np.zeros(n_sensors)
    if others.size == 0:
        return MeanFieldObservation(np.zeros(2), np.zeros(2), schedule, 0)
    if last_actions is not None:
        for k in others:
            schedule[last_actions[k].sensor_index] += 1.0
        schedule /= others.size
    return MeanFieldObservation(pos[others].mean(axis=0), vel[others].mean(axis=0),
                                schedule, int(others.size))


def mean_field_cost(cost_field, density: DensityGrid) -> float:
    """Quadrature of a per-cell running cost against the mean-field measure."""
    c = np.asarray(cost_field, dtype=float)
    if c.shape != density.mass.shape:
        raise ContractViolation(f"cost field shape {c.shape} != grid shape {density.mass.shape}")
    return float(np.sum(c * density.mass))


def _as_density(slice_) -> tuple[np.ndarray, float, float]:
    if isinstance(slice_, DensityGrid):
        hx, hy = slice_.spacing
        return slice_.density(), hx, hy
    raise ContractViolation(f"expected DensityGrid, got {type(slice_).__name__}")


def fpk_residual(density_seq: Sequence[DensityGrid], velocity_field, sigma: float,
                 dt: float) -> float:
    """L2 norm of the Fokker-Planck residual of a density time series.

    Uses the advective transport term ``grad(m) . v``. Each pair of consecutive
    slices is differenced in time and the spatial terms are taken on their
    average (central differences, interior cells only), so the residual of an
    exact solution shrinks quadratically as the grid and time step are refined.
    ``velocity_field`` is either one (vx, vy) pair or an ``(nx, ny, 2)`` array.
    """
    if len(density_seq) < 2:
        raise ContractViolation("fpk_residual needs at least two time slices")
    if dt <= 0:
        raise ContractViolation("dt must be positive")
    slices = [_as_density(s) for s in density_seq]
    m0, hx, hy = slices[0]
    nx, ny = m0.shape
    if nx < 3 or ny < 3:
        raise ContractViolation(f"grid too small for central differences: {nx}x{ny}")
    if any(s[0].shape != m0.shape for s in slices):
        raise ContractViolation("all density slices must share one grid")
    v = np.asarray(velocity_field, dtype=float)
    if v.shape == (2,):
        vx, vy = v[0], v[1]
    elif v.shape == (nx, ny, 2):
        vx, vy = v[1:-1, 1:-1, 0], v[1:-1, 1:-1, 1]
    else:
        raise ContractViolation(f"velocity field shape {v.shape} does not match grid")
    diff = 0.5 * sigma ** 2
    total = 0.0
    for (a, _, _), (b, _, _) in zip(slices[:-1], slices[1:]):
        dm_dt = (b[1:-1, 1:-1] - a[1:-1, 1:-1]) / dt
        mid = 0.5 * (a + b)
        gx = (mid[2:, 1:-1] - mid[:-2, 1:-1]) / (2 * hx)
        gy = (mid[1:-1, 2:] - mid[1:-1, :-2]) / (2 * hy)
        lap = ((mid[2:, 1:-1] - 2 * mid[1:-1, 1:-1] + mid[:-2, 1:-1]) / hx ** 2
               + (mid[1:-1, 2:] - 2 * mid[1:-1, 1:-1] + mid[1:-1, :-2]) / hy ** 2)
        r = dm_dt + gx * vx + gy * vy - diff * lap
        total += float(np.sum(r * r)) * hx * hy
    return float(np.sqrt(total / (len(slices) - 1)))


def weak_form_check(samples, g: Callable, analytic_integral: float) -> tuple[float, float]:
    """Monte-Carlo estimate of the integral of ``g`` against the sample measure.

    ``g`` takes arrays ``x`` and ``y`` and returns per-sample values.
    """
    p = np.asarray(samples, dtype=float).reshape(-1, 2)
    if p.shape[0] < 1:
        raise ContractViolation("weak_form_check needs at least one sample")
    vals = np.broadcast_to(np.asarray(g(p[:, 0], p[:, 1]), dtype=float), (p.shape[0],))
    est = float(np.mean(vals))
    return est, abs(est - analytic_integral)

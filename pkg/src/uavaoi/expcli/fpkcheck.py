"""Grid-refinement check of the Fokker-Planck residual on analytic solutions.

Both cases are isotropic Gaussians ``N(mu0 + v t, (s0^2 + sigma^2 t) I)``:
``translating`` has a drift and no diffusion, ``diffusion`` the reverse.
Densities are exact cell masses (differences of the normal CDF), so the only
error left in the residual is the discretisation itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..meanfield import DensityGrid, fpk_residual
from ..world import Bounds

_erf = np.frompyfunc(math.erf, 1, 1)

CASES = {
    # name: (drift, sigma)
    "translating": ((0.8, -0.5), 0.0),
    "diffusion": ((0.0, 0.0), 0.9),
}


def _axis_mass(edges: np.ndarray, mean: float, std: float) -> np.ndarray:
    cdf = 0.5 * (1.0 + _erf((edges - mean) / (std * math.sqrt(2.0))).astype(float))
    return np.diff(cdf)


def gaussian_grid(bounds: Bounds, n: int, mean, var: float) -> DensityGrid:
    """Cell masses of an isotropic Gaussian on an ``n x n`` grid, renormalised to 1."""
    std = math.sqrt(var)
    ex = np.linspace(bounds.x_min, bounds.x_max, n + 1)
    ey = np.linspace(bounds.y_min, bounds.y_max, n + 1)
    mass = np.outer(_axis_mass(ex, mean[0], std), _axis_mass(ey, mean[1], std))
    return DensityGrid(bounds, mass / mass.sum())


@dataclass(frozen=True)
class FpkConvergence:
    case: str
    cells: tuple
    residuals: tuple

    @property
    def ratios(self) -> tuple:
        r = self.residuals
        return tuple(a / b for a, b in zip(r[:-1], r[1:]))


def fpk_convergence(case: str = "translating", cells=(16, 32, 64), half_width: float = 6.0,
                    s0: float = 1.0, horizon: float = 0.5, steps_at_coarsest: int = 4
                    ) -> FpkConvergence:
    """Residual norms as the grid is refined; the time step shrinks with the spacing."""
    if case not in CASES:
        raise ConfigError(f"unknown case {case!r}; choose from {sorted(CASES)}")
    drift, sigma = CASES[case]
    bounds = Bounds(-half_width, half_width, -half_width, half_width)
    residuals = []
    for n in cells:
        steps = steps_at_coarsest * n // cells[0]
        dt = horizon / steps
        seq = [gaussian_grid(bounds, n, (drift[0] * k * dt, drift[1] * k * dt),
                             s0 ** 2 + sigma ** 2 * k * dt)
               for k in range(steps + 1)]
        residuals.append(fpk_residual(seq, drift, sigma, dt))
    return FpkConvergence(case, tuple(cells), tuple(residuals))

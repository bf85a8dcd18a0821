"""Free-space Poisson solver for ``-eps^2 Laplacian(psi) = rho`` on the box.

``psi`` is the discrete Newtonian potential ``sum_j G(x_i - x_j) rho_j h^dim``
evaluated by Hockney zero padding: the kernel lives on a grid of ``2N`` cells
per axis so the circular FFT convolution has no periodic images.
"""
from __future__ import annotations

import logging
import math

import numpy as np
import scipy.fft

from .grid import Grid

logger = logging.getLogger(__name__)

#: Mean of ``1/|x|`` over the unit cube ``[-1/2, 1/2]^3``.
CUBE_MEAN_INV_R = 2.3800773639795535
#: Mean of ``ln|x|`` over the unit square ``[-1/2, 1/2]^2``.
SQUARE_MEAN_LOG_R = -1.0611754268825243
#: Surface area of the unit sphere in R^3, ``2 pi^{3/2} / Gamma(3/2)``.
S3 = 2.0 * math.pi ** 1.5 / math.gamma(1.5)

DIRECT_SUM_WARN_CELLS = 24 ** 3


def green_function(r: np.ndarray, grid: Grid, epsilon: float = 1.0) -> np.ndarray:
    """Kernel values at distances ``r``; the cell mean is used where ``r == 0``."""
    h = grid.h
    with np.errstate(divide="ignore"):
        if grid.dim == 3:
            G = 1.0 / (S3 * epsilon ** 2 * r)
            self_cell = CUBE_MEAN_INV_R / (S3 * epsilon ** 2 * h)
        else:
            G = -np.log(r) / (2.0 * math.pi * epsilon ** 2)
            self_cell = -(math.log(h) + SQUARE_MEAN_LOG_R) / (2.0 * math.pi * epsilon ** 2)
    return np.where(r == 0, self_cell, G)


class PoissonSolver:
    """Precomputed free-space convolution for one grid and Debye length.

    Parameters
    ----------
    grid : Grid
    epsilon : float
        Scaled Debye length; enters only through the kernel prefactor.

    Notes
    -----
    The 2D logarithmic kernel is experimental.
    """

    def __init__(self, grid: Grid, epsilon: float = 1.0):
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.grid = grid
        self.epsilon = float(epsilon)
        N = grid.N
        m = np.arange(2 * N)
        m = np.where(m < N, m, m - 2 * N)  # signed offsets on the padded grid
        axes = np.meshgrid(*([m * grid.h] * grid.dim), indexing="ij")
        r = np.sqrt(sum(a * a for a in axes))
        self.kernel = green_function(r, grid, self.epsilon) * grid.cell_volume
        self._kernel_hat = scipy.fft.rfftn(self.kernel)
        self._padded = (2 * N,) * grid.dim

    def solve(self, rho) -> np.ndarray:
        """Potential of the charge density ``rho`` with open boundaries."""
        rho = self.grid.check(rho, "charge density")
        if not np.all(np.isfinite(rho)):
            raise ValueError("charge density contains non-finite values")
        rho_hat = scipy.fft.rfftn(rho, s=self._padded)
        psi = scipy.fft.irfftn(rho_hat * self._kernel_hat, s=self._padded)
        return np.ascontiguousarray(psi[(slice(0, self.grid.N),) * self.grid.dim])

    def direct_sum(self, rho) -> np.ndarray:
        """Reference ``O(cells^2)`` evaluation of the same discrete sum."""
        g = self.grid
        rho = g.check(rho, "charge density")
        if g.size > DIRECT_SUM_WARN_CELLS:
            logger.warning("direct_sum on %d cells is slow", g.size)
        pts = np.stack([x.ravel() for x in g.mesh], axis=1)
        q = rho.ravel() * g.cell_volume
        out = np.empty(len(pts))
        chunk = max(1, 2_000_000 // len(pts))
        for s in range(0, len(pts), chunk):
            d = pts[s:s + chunk, None, :] - pts[None, :, :]
            r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
            out[s:s + chunk] = green_function(r, g, self.epsilon) @ q
        return out.reshape(g.shape)


def solve(rho, solver: PoissonSolver) -> np.ndarray:
    return solver.solve(rho)


def direct_sum(rho, solver: PoissonSolver) -> np.ndarray:
    return solver.direct_sum(rho)


def gradient(psi, grid: Grid) -> list[np.ndarray]:
    """Central differences inside, one-sided differences on box faces."""
    psi = grid.check(psi, "potential")
    return [np.gradient(psi, grid.h, axis=ax, edge_order=1) for ax in range(grid.dim)]


def laplacian(psi, grid: Grid) -> np.ndarray:
    """Standard ``2 dim + 1`` point Laplacian; boundary cells are set to NaN."""
    psi = grid.check(psi, "potential")
    lap = np.full(grid.shape, np.nan)
    inner = (slice(1, -1),) * grid.dim
    acc = -2.0 * grid.dim * psi[inner]
    for ax in range(grid.dim):
        lo = list(inner)
        hi = list(inner)
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        acc = acc + psi[tuple(lo)] + psi[tuple(hi)]
    lap[inner] = acc / grid.h ** 2
    return lap

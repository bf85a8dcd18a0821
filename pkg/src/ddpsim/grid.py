"""Uniform Cartesian grid on a truncated box, quadrature and norms.

Scalar fields are plain ``numpy`` arrays of shape ``grid.shape`` holding
cell-centred values.  Array axis ``i`` is coordinate ``x_i``; flattening with
``order="F"`` therefore gives the row-major, x-fastest layout used on disk.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class GridMismatchError(ValueError):
    """Raised when a field does not live on the expected grid."""


@dataclass(frozen=True)
class Grid:
    """Box ``[-L, L]^dim`` split into ``N`` cells per axis.

    Parameters
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    L : float
        Half width of the box.
    N : int
        Cells per axis; even and at least 4.
    """

    dim: int = 3
    L: float = 8.0
    N: int = 64

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if not self.L > 0:
            raise ValueError(f"half width L must be positive, got {self.L}")
        if self.N < 4 or self.N % 2:
            raise ValueError(f"N must be even and >= 4, got {self.N}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def size(self) -> int:
        return self.N ** self.dim

    @property
    def volume(self) -> float:
        return (2.0 * self.L) ** self.dim

    @cached_property
    def centers(self) -> np.ndarray:
        """1D cell-centre coordinates along any axis."""
        return -self.L + self.h * (np.arange(self.N) + 0.5)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays ``(x_0, ..., x_{dim-1})``, each of ``shape``."""
        grids = np.meshgrid(*([self.centers] * self.dim), indexing="ij")
        for g in grids:
            g.setflags(write=False)
        return tuple(grids)

    def radius2(self, center=None) -> np.ndarray:
        """Squared distance of every cell centre to ``center``."""
        center = np.zeros(self.dim) if center is None else np.asarray(center, float)
        return sum((x - c) ** 2 for x, c in zip(self.mesh, center))

    def check(self, f, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise GridMismatchError(
                f"{name} has shape {f.shape}, grid expects {self.shape}")
        return f

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    def integrate(self, f, weight=None) -> float:
        """Midpoint quadrature ``sum(f * weight) * h^dim``."""
        f = self.check(f)
        if weight is not None:
            f = f * self.check(weight, "weight")
        return float(np.sum(f)) * self.cell_volume

    def lr_norm(self, f, r: float) -> float:
        """``L^r`` norm of ``f``; ``r = np.inf`` gives the max norm."""
        if not r >= 1:
            raise ValueError(f"L^r norm needs r >= 1, got {r}")
        a = np.abs(self.check(f))
        top = float(a.max())
        if np.isinf(r) or top == 0.0:
            return top
        if r == 1:
            return self.integrate(a)
        a = a / top  # avoids under/overflow of a**r
        if r == 2:
            return top * float(np.sqrt(self.integrate(a * a)))
        return top * self.integrate(a ** r) ** (1.0 / r)

    def weighted_l2_norm(self, f, V) -> float:
        """Norm of ``f`` in ``L^2(e^V dx)``.

        Raises
        ------
        OverflowError
            If ``e^V`` overflows at some cell; the box is then too large for
            the potential's growth.
        """
        f = self.check(f)
        w = exp_checked(self.check(V, "potential"), "e^V")
        return float(np.sqrt(self.integrate(f * f, w)))


def exp_checked(x: np.ndarray, what: str = "exp") -> np.ndarray:
    """``np.exp`` that raises with the offending cell instead of returning inf."""
    with np.errstate(over="ignore"):
        y = np.exp(x)
    bad = ~np.isfinite(y)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise OverflowError(f"{what} overflows at cell {idx} (argument {x[idx]:.6g})")
    return y

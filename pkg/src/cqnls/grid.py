"""Uniform periodic computational box and its spectral metadata."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform 3-D box [-L_i, L_i) with n_i points per axis, x3 fastest.

    Spacings h_i = 2 L_i / n_i; grid coordinates x_i = -L_i + j h_i.
    """

    n1: int
    n2: int
    n3: int
    L1: float
    L2: float
    L3: float

    def __post_init__(self):
        for n in (self.n1, self.n2, self.n3):
            if n < 8 or n % 2 != 0:
                raise ValueError(f"grid size {n} must be even and >= 8")
        for L in (self.L1, self.L2, self.L3):
            if not (L > 0):
                raise ValueError(f"box half-width {L} must be positive")

    @property
    def shape(self):
        return (self.n1, self.n2, self.n3)

    @property
    def size(self):
        return self.n1 * self.n2 * self.n3

    @property
    def spacings(self):
        return (2 * self.L1 / self.n1, 2 * self.L2 / self.n2, 2 * self.L3 / self.n3)

    @property
    def cell_volume(self):
        h1, h2, h3 = self.spacings
        return h1 * h2 * h3

    def axis_coords(self, axis):
        n = (self.n1, self.n2, self.n3)[axis]
        L = (self.L1, self.L2, self.L3)[axis]
        h = 2 * L / n
        return -L + h * np.arange(n)

    def axis_wavenumbers(self, axis):
        n = (self.n1, self.n2, self.n3)[axis]
        h = self.spacings[axis]
        return 2 * np.pi * np.fft.fftfreq(n, d=h)


def _bcast_shape(axis):
    s = [1, 1, 1]
    s[axis] = -1
    return tuple(s)


@lru_cache(maxsize=8)
def coords(grid: GridSpec):
    """Broadcastable coordinate arrays (x1, x2, x3)."""
    return tuple(
        grid.axis_coords(a).reshape(_bcast_shape(a)) for a in range(3)
    )


@lru_cache(maxsize=8)
def wavenumbers(grid: GridSpec):
    """Broadcastable wavenumber arrays (k1, k2, k3), fftfreq ordering."""
    return tuple(
        grid.axis_wavenumbers(a).reshape(_bcast_shape(a)) for a in range(3)
    )


@lru_cache(maxsize=8)
def ksq(grid: GridSpec):
    """|k|^2 on the full grid (n1, n2, n3)."""
    k1, k2, k3 = wavenumbers(grid)
    return (k1**2 + k2**2 + k3**2).astype(np.float64)


@lru_cache(maxsize=8)
def radius_sq(grid: GridSpec):
    """|x|^2 on the full grid."""
    x1, x2, x3 = coords(grid)
    return (x1**2 + x2**2 + x3**2).astype(np.float64)


@lru_cache(maxsize=16)
def trap_potential(grid: GridSpec, omega: float, k: float):
    """omega * |x|^k, evaluated with the non-periodic coordinates on the box."""
    r2 = radius_sq(grid)
    with np.errstate(divide="ignore"):
        w = omega * r2 ** (k / 2.0)
    if k < 2:
        w[r2 == 0.0] = 0.0
    return w

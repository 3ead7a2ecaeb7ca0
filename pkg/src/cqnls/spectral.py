"""FFT-based differentiation, interpolation, and resolution diagnostics.

All transforms go through scipy.fft (pocketfft): deterministic, and the
worker count only affects speed, never values.
"""

import os
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .grid import GridSpec, ksq

_MAX_WORKERS = min(4, os.cpu_count() or 1)
_SMALL = 1 << 19  # below ~0.5M points thread spawn costs more than it saves


def _workers(a):
    return 1 if a.size < _SMALL else _MAX_WORKERS


def fftn(a):
    return sfft.fftn(a, workers=_workers(a))


def ifftn(a):
    return sfft.ifftn(a, workers=_workers(a))


def fft_axis(a, axis):
    return sfft.fft(a, axis=axis, workers=_workers(a))


def ifft_axis(a, axis):
    return sfft.ifft(a, axis=axis, workers=_workers(a))


def partial(u, grid: GridSpec, axis):
    """Spectral partial derivative along one axis (1-D transforms only)."""
    k = grid.axis_wavenumbers(axis)
    shape = [1, 1, 1]
    shape[axis] = -1
    uhat = fft_axis(u, axis)
    uhat *= 1j * k.reshape(shape)
    return ifft_axis(uhat, axis)


def minus_half_laplacian(u, grid: GridSpec):
    """-(1/2) lap u via the full 3-D transform."""
    return ifftn(0.5 * ksq(grid) * fftn(u))


def kinetic_and_partials(u, grid: GridSpec):
    """(1/2)||grad u||_2^2 together with d1 u and d2 u in real space.

    The kinetic term is evaluated by the axis-wise Parseval identity, so it
    is consistent with the spectral derivatives to rounding.
    """
    dv = grid.cell_volume
    n = grid.size
    kin = 0.0
    parts = []
    for axis in range(3):
        k = grid.axis_wavenumbers(axis)
        shape = [1, 1, 1]
        shape[axis] = -1
        uhat = fft_axis(u, axis)
        kk = k.reshape(shape)
        na = u.shape[axis]
        kin += (np.abs(uhat) ** 2 * kk**2).sum() / na
        if axis < 2:
            parts.append(
                ifft_axis(uhat * (1j * kk), axis)
            )
    kin *= 0.5 * dv
    return kin, parts[0], parts[1]


def shift_phase(grid: GridSpec, dt):
    """exp(-i dt (1/2)|k|^2): the free-flight multiplier."""
    return np.exp(-0.5j * dt * ksq(grid))


@lru_cache(maxsize=32)
def _dilation_matrix(grid: GridSpec, axis: int, tau: float):
    """Chirp matrix evaluating the 1-D trig interpolant at tau * x_j.

    The DFT interpolant is anchored at the first sample x = -L, so the
    evaluation phase is k (tau x + L).
    """
    x = grid.axis_coords(axis)
    L = (grid.L1, grid.L2, grid.L3)[axis]
    k = grid.axis_wavenumbers(axis)
    n = x.size
    m = np.exp(1j * np.outer(tau * x + L, k)) / n
    # Evaluation points that land outside the fundamental box would sample
    # the periodic image; the true field decays there, so those rows are zeroed.
    outside = (tau * x < -L) | (tau * x >= L)
    m[outside, :] = 0.0
    return m


def dilate_values(u, grid: GridSpec, tau: float):
    """tau^{3/2} u(tau x) by spectral interpolation, axis by axis."""
    out = u
    for axis in range(3):
        m = _dilation_matrix(grid, axis, float(tau))
        uhat = fft_axis(out, axis)
        out = np.moveaxis(
            np.tensordot(m, uhat, axes=([1], [axis])), 0, axis
        )
    return tau**1.5 * np.ascontiguousarray(out)


def resample_values(u, grid: GridSpec, new_grid: GridSpec):
    """Evaluate the trig interpolant of u on the points of another box.

    Points of the new grid outside the old box get zero (decaying fields).
    """
    out = u
    for axis in range(3):
        x_new = new_grid.axis_coords(axis)
        L_old = (grid.L1, grid.L2, grid.L3)[axis]
        k = grid.axis_wavenumbers(axis)
        n = (grid.n1, grid.n2, grid.n3)[axis]
        m = np.exp(1j * np.outer(x_new + L_old, k)) / n
        outside = (x_new < -L_old) | (x_new >= L_old)
        m[outside, :] = 0.0
        uhat = fft_axis(out, axis)
        out = np.moveaxis(np.tensordot(m, uhat, axes=([1], [axis])), 0, axis)
    return np.ascontiguousarray(out)


def spectral_tail_fraction(u, grid: GridSpec, shell=1.0 / 6.0):
    """Fraction of |u_hat|^2 carried by the top `shell` of any axis band."""
    uhat2 = np.abs(fftn(u)) ** 2
    total = uhat2.sum()
    if total == 0.0:
        return 0.0
    mask = np.zeros(grid.shape, dtype=bool)
    for axis, n in enumerate(grid.shape):
        idx = np.fft.fftfreq(n)  # cycles: |idx| in [0, 0.5]
        band = np.abs(idx) > 0.5 * (1.0 - shell)
        shape = [1, 1, 1]
        shape[axis] = -1
        mask |= band.reshape(shape)
    return float(uhat2[mask].sum() / total)


def aliasing_exposure(u, grid: GridSpec, tau: float):
    """|u_hat|^2 fraction that a dilation by tau>1 would push past Nyquist."""
    if tau <= 1.0:
        return 0.0
    uhat2 = np.abs(fftn(u)) ** 2
    total = uhat2.sum()
    if total == 0.0:
        return 0.0
    mask = np.zeros(grid.shape, dtype=bool)
    for axis, n in enumerate(grid.shape):
        idx = np.fft.fftfreq(n)
        band = np.abs(idx) > 0.5 / tau
        shape = [1, 1, 1]
        shape[axis] = -1
        mask |= band.reshape(shape)
    return float(uhat2[mask].sum() / total)


def boundary_mass_fraction(u, grid: GridSpec, shell=0.1):
    """Mass fraction in the outer `shell` (sup-norm) of the box."""
    d = np.abs(u) ** 2
    total = d.sum()
    if total == 0.0:
        return 0.0
    mask = np.zeros(grid.shape, dtype=bool)
    for axis, (n, L) in enumerate(zip(grid.shape, (grid.L1, grid.L2, grid.L3))):
        x = grid.axis_coords(axis)
        band = np.abs(x) > (1.0 - shell) * L
        shape = [1, 1, 1]
        shape[axis] = -1
        mask |= band.reshape(shape)
    return float(d[mask].sum() / total)


def shear(u, grid: GridSpec, shear_axis: int, coord_axis: int, s: float):
    """Translate along `shear_axis` by s * x_{coord_axis}, spectrally exact.

    out(x) = u(..., x_shear - s * x_coord, ...) as the periodic interpolant.
    """
    k = grid.axis_wavenumbers(shear_axis)
    kshape = [1, 1, 1]
    kshape[shear_axis] = -1
    x = grid.axis_coords(coord_axis)
    xshape = [1, 1, 1]
    xshape[coord_axis] = -1
    phase = np.exp(
        -1j * s * k.reshape(kshape) * x.reshape(xshape)
    )
    uhat = fft_axis(u, shear_axis)
    return ifft_axis(uhat * phase, shear_axis)


def rotate_xy(u, grid: GridSpec, phi: float):
    """Rotation by phi about the z axis: u(R_{-phi} x), three-shear split.

    Exact quarter turns (index permutations, requiring n1=n2 and L1=L2) are
    composed with a residual |phi_r| <= pi/4 done as shears
    shear_x(-tan(phi_r/2)) . shear_y(sin(phi_r)) . shear_x(-tan(phi_r/2)).
    """
    phi = float(phi) % (2 * np.pi)
    quarter = int(np.round(phi / (np.pi / 2)))
    resid = phi - quarter * (np.pi / 2)
    quarter %= 4
    out = u
    if quarter:
        if grid.n1 != grid.n2 or grid.L1 != grid.L2:
            raise ValueError("quarter-turn rotation needs n1=n2 and L1=L2")
        for _ in range(quarter):
            # x1' = -x2, x2' = x1 evaluated on the centered grid: the image of
            # grid point (i, j) is (j, n-i) up to the wrap of the -L column.
            out = np.roll(np.flip(np.swapaxes(out, 0, 1), axis=0), 1, axis=0)
    if resid != 0.0:
        t = -np.tan(resid / 2.0)
        s = np.sin(resid)
        out = shear(out, grid, 0, 1, t)
        out = shear(out, grid, 1, 0, s)
        out = shear(out, grid, 0, 1, t)
    return out

"""Pure-numpy implementations of the hot pointwise kernels.

Reference backend: every function here defines the semantics the numba
backend must reproduce (up to floating-point reassociation).
"""

import numpy as np

BACKEND_NAME = "numpy"


def abs2(u):
    return u.real * u.real + u.imag * u.imag


def density_moments(u, w, dv):
    """Sums of |u|^2, w|u|^2, |u|^4, |u|^6 over the grid, times the cell volume.

    Returns (mass, trap, quartic, sextic).
    """
    d = abs2(u)
    mass = d.sum()
    trap = (w * d).sum()
    d2 = d * d
    quartic = d2.sum()
    sextic = (d2 * d).sum()
    return mass * dv, trap * dv, quartic * dv, sextic * dv


def wdot(a, b, dv):
    """Discrete L2 inner product <a, b> = sum(conj(a)*b)*dv (complex)."""
    return np.vdot(a, b) * dv


def norm2sq(a, dv):
    return (abs2(a)).sum() * dv


def gradient_combine(minus_half_lap, u, w, mu):
    """-0.5*lap(u) + (w - |u|^2 + mu|u|^4) u, given -0.5*lap(u) precomputed."""
    d = abs2(u)
    return minus_half_lap + (w - d + mu * d * d) * u


def hessian_combine(minus_half_lap_v, u, v, w, mu):
    """Second-derivative action of the energy, pointwise part.

    E''(u)v = -0.5 lap v + w v - (|u|^2 v + 2 Re(conj(u) v) u)
              + mu (|u|^4 v + 4 |u|^2 Re(conj(u) v) u)
    """
    d = abs2(u)
    re_uv = u.real * v.real + u.imag * v.imag
    return (
        minus_half_lap_v
        + w * v
        - (d * v + 2.0 * re_uv * u)
        + mu * (d * d * v + 4.0 * d * re_uv * u)
    )


def phase_apply(u, w, mu, coef):
    """u * exp(1j * coef * (w - |u|^2 + mu|u|^4)); the nonlinear half-step."""
    d = abs2(u)
    return u * np.exp(1j * coef * (w - d + mu * d * d))


_CRC64_POLY = np.uint64(0xC96C5795D7870F42)  # CRC-64/XZ, reflected


def _crc64_table():
    table = np.zeros(256, dtype=np.uint64)
    for i in range(256):
        crc = np.uint64(i)
        for _ in range(8):
            if crc & np.uint64(1):
                crc = (crc >> np.uint64(1)) ^ _CRC64_POLY
            else:
                crc >>= np.uint64(1)
        table[i] = crc
    return table


CRC64_TABLE = _crc64_table()


def crc64(data):
    """CRC-64/XZ of a byte buffer (init and xorout all-ones)."""
    buf = np.frombuffer(data, dtype=np.uint8)
    crc = np.uint64(0xFFFFFFFFFFFFFFFF)
    table = CRC64_TABLE
    mask = np.uint64(0xFF)
    eight = np.uint64(8)
    for byte in buf:
        crc = table[(crc ^ np.uint64(byte)) & mask] ^ (crc >> eight)
    return int(crc ^ np.uint64(0xFFFFFFFFFFFFFFFF))

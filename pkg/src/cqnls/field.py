"""Wavefunctions on the grid and the discrete energy machinery.

Conventions. The energy of a complex field u with trap w(x) = omega |x|^k is

    E(u) = int [ (1/2)|grad u|^2 + w|u|^2 - (1/2)|u|^4 + (mu/3)|u|^6 ]

with mass M(u) = ||u||_2^2 and angular momentum L(u) = Re<u, Lz u>,
Lz u = -i (x1 d2 u - x2 d1 u).  The first-variation operator is

    Eop(u) = -(1/2) lap u + w u - |u|^2 u + mu |u|^4 u,

so that d/de E(u + e v)|_0 = 2 Re<Eop(u), v>.  Constrained critical points
solve Eop(u) = lambda u + Omega Lz u; the factor 2 cancels from both sides.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels, spectral
from .errors import GridMismatchError, NonFiniteFieldError, ResolutionWarning
from .grid import GridSpec, trap_potential, coords, ksq as grid_ksq

BOUNDARY_MASS_GUARD = 1e-10


@dataclass(frozen=True)
class ProblemParams:
    """Physical parameters and constraint targets for one run."""

    omega: float
    k: float
    mu: float
    m: float
    l: float
    rho: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be > 0")
        if not self.k >= 2:
            raise ValueError("k must be >= 2")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if not self.m > 0:
            raise ValueError("m must be > 0")
        if not self.rho > 0:
            raise ValueError("rho must be > 0")


@dataclass(frozen=True)
class Field:
    """Immutable complex field samples on a GridSpec."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        if v.shape != self.grid.shape:
            v = v.reshape(self.grid.shape)
        if not np.isfinite(v.view(np.float64)).all():
            raise NonFiniteFieldError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values):
        return Field(self.grid, values)

    def same_grid(self, other: "Field"):
        if self.grid != other.grid:
            raise GridMismatchError(
                f"grids differ: {self.grid} vs {other.grid}"
            )


@dataclass(frozen=True)
class FunctionalReport:
    """Every functional of one field, evaluated consistently in one pass."""

    kinetic: float
    trap: float
    quartic: float
    sextic: float
    energy: float
    mass: float
    angmom: float
    angmom_imag_residual: float
    sigma_dot: float
    pohozaev: float


def zero_field(grid: GridSpec) -> Field:
    return Field(grid, np.zeros(grid.shape, dtype=np.complex128))


def functionals(u: Field, p: ProblemParams) -> FunctionalReport:
    """All discrete functionals of u (spectral gradients, rectangle rule)."""
    g = u.grid
    dv = g.cell_volume
    w = trap_potential(g, p.omega, p.k)
    mass, trap, quartic, sextic = kernels.density_moments(u.values, w, dv)
    kin, d1, d2 = spectral.kinetic_and_partials(u.values, g)
    x1, x2, _ = coords(g)
    # <u, Lz u> = -i * sum conj(u) (x1 d2 u - x2 d1 u) dv
    s = kernels.wdot(u.values, x1 * d2 - x2 * d1, dv)
    angmom = s.imag  # Re(-i s)
    angmom_imag = -s.real  # Im(-i s)
    energy = kin + trap - quartic / 2.0 + p.mu * sextic / 3.0
    sigma_dot = kin + trap
    pohozaev = (
        2.0 * kin - p.k * trap + 2.0 * p.mu * sextic - 1.5 * quartic
    )
    return FunctionalReport(
        kinetic=kin,
        trap=trap,
        quartic=quartic,
        sextic=sextic,
        energy=energy,
        mass=mass,
        angmom=angmom,
        angmom_imag_residual=angmom_imag,
        sigma_dot=sigma_dot,
        pohozaev=pohozaev,
    )


class EnergyTerms(tuple):
    """Lean (kinetic, trap, quartic, sextic, mass, energy, sigma_dot)."""

    __slots__ = ()

    @property
    def kinetic(self):
        return self[0]

    @property
    def trap(self):
        return self[1]

    @property
    def quartic(self):
        return self[2]

    @property
    def sextic(self):
        return self[3]

    @property
    def mass(self):
        return self[4]

    @property
    def energy(self):
        return self[5]

    @property
    def sigma_dot(self):
        return self[6]


def energy_terms(u: Field, p: ProblemParams) -> EnergyTerms:
    """Energy pieces only (one 3-D transform, no angular momentum)."""
    g = u.grid
    dv = g.cell_volume
    w = trap_potential(g, p.omega, p.k)
    mass, trap, quartic, sextic = kernels.density_moments(u.values, w, dv)
    uhat = spectral.fftn(u.values)
    kin = 0.5 * dv / g.size * float(
        (kernels.abs2(uhat) * grid_ksq(g)).sum()
    )
    energy = kin + trap - quartic / 2.0 + p.mu * sextic / 3.0
    return EnergyTerms((kin, trap, quartic, sextic, mass, energy, kin + trap))


def gradient(u: Field, p: ProblemParams) -> Field:
    """Eop(u) = -(1/2) lap u + (w - |u|^2 + mu |u|^4) u."""
    g = u.grid
    w = trap_potential(g, p.omega, p.k)
    mhl = spectral.minus_half_laplacian(u.values, g)
    out = kernels.gradient_combine(mhl, u.values, w, p.mu)
    if not np.isfinite(out.view(np.float64)).all():
        raise NonFiniteFieldError("gradient overflow (|u|^4 u too large)")
    return Field(g, out)


def hessian_vector(u: Field, v: Field, p: ProblemParams) -> Field:
    """Action of the second derivative of E at u on a direction v."""
    u.same_grid(v)
    g = u.grid
    w = trap_potential(g, p.omega, p.k)
    mhl = spectral.minus_half_laplacian(v.values, g)
    return Field(g, kernels.hessian_combine(mhl, u.values, v.values, w, p.mu))


def apply_lz(u: Field) -> Field:
    """Lz u = -i (x1 d2 u - x2 d1 u), spectral derivatives."""
    g = u.grid
    d1 = spectral.partial(u.values, g, 0)
    d2 = spectral.partial(u.values, g, 1)
    x1, x2, _ = coords(g)
    return Field(g, -1j * (x1 * d2 - x2 * d1))


def inner(a: Field, b: Field) -> complex:
    a.same_grid(b)
    return kernels.wdot(a.values, b.values, a.grid.cell_volume)


def norm_l2(a: Field) -> float:
    return math.sqrt(kernels.norm2sq(a.values, a.grid.cell_volume))


def sigma_norm_sq(u: Field, p: ProblemParams) -> float:
    """Full Sigma norm squared: sigma_dot + mass."""
    rep = functionals(u, p)
    return rep.sigma_dot + rep.mass


ALIAS_WARN_FRACTION = 1e-8


def dilate(u: Field, tau: float, warn_fraction: float = ALIAS_WARN_FRACTION) -> Field:
    """tau^{3/2} u(tau x): mass- and angular-momentum-preserving rescaling.

    Spectral interpolation on the periodic box.  For tau > 1 the spectrum
    expands by tau; the pre-dilation spectral mass beyond Nyquist/tau is the
    aliasing exposure and triggers a ResolutionWarning over `warn_fraction`.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if tau == 1.0:
        return u
    exposure = spectral.aliasing_exposure(u.values, u.grid, tau)
    if exposure > warn_fraction:
        warnings.warn(
            f"dilate(tau={tau:g}): {exposure:.2e} of the spectrum aliases",
            ResolutionWarning,
            stacklevel=2,
        )
    return Field(u.grid, spectral.dilate_values(u.values, u.grid, tau))


def regrid(u: Field, new_grid: GridSpec) -> Field:
    """Spectral resample of u onto another box (new points outside get 0)."""
    if new_grid == u.grid:
        return u
    return Field(new_grid, spectral.resample_values(u.values, u.grid, new_grid))


def boundary_mass(u: Field, guard: float = BOUNDARY_MASS_GUARD, warn: bool = False):
    """Mass fraction in the outer 10% shell; optional guard warning."""
    frac = spectral.boundary_mass_fraction(u.values, u.grid)
    if warn and frac > guard:
        warnings.warn(
            f"boundary-mass fraction {frac:.2e} exceeds guard {guard:g}; "
            "the box truncation of R^3 is no longer clean",
            ResolutionWarning,
            stacklevel=2,
        )
    return frac


def _mode_profile(grid: GridSpec, n: int, sigma_r: float, sigma_z: float):
    """(x1 + i sgn(n) x2)^{|n|} exp(-(r_perp^2/(2 sr^2) + z^2/(2 sz^2)))."""
    x1, x2, x3 = coords(grid)
    envelope = np.exp(
        -(x1**2 + x2**2) / (2.0 * sigma_r**2) - x3**2 / (2.0 * sigma_z**2)
    )
    if n == 0:
        return envelope.astype(np.complex128)
    zfac = (x1 + 1j * np.sign(n) * x2) ** abs(n)
    return zfac * envelope


def make_seed(grid: GridSpec, m: float, l: float, widths) -> Field:
    """Two-harmonic Gaussian mixture with mass m and angular momentum l.

    Uses angular harmonics n_lo = floor(l/m) and n_hi = n_lo + 1 so the mode
    weights solving  w_lo + w_hi = m,  n_lo w_lo + n_hi w_hi = l  are both
    nonnegative for any l; (0, 1) is the default pair for 0 <= l/m <= 1.
    """
    if not m > 0:
        raise ValueError("seed mass must be positive")
    if np.isscalar(widths):
        sigma_r = sigma_z = float(widths)
    else:
        sigma_r, sigma_z = (float(widths[0]), float(widths[1]))
    f = l / m
    n_lo = math.floor(f)
    n_hi = n_lo + 1
    w_hi = (l - n_lo * m) / (n_hi - n_lo)
    w_lo = m - w_hi
    dv = grid.cell_volume
    out = np.zeros(grid.shape, dtype=np.complex128)
    for n, wgt in ((n_lo, w_lo), (n_hi, w_hi)):
        if wgt <= 0.0:
            continue
        mode = _mode_profile(grid, n, sigma_r, sigma_z)
        mode_mass = kernels.norm2sq(mode, dv)
        out += math.sqrt(wgt / mode_mass) * mode
    return Field(grid, out)

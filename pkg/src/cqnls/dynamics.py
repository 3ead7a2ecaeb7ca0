"""Split-step propagation in the rotating frame, plus the stability probe.

One step of  i dt v = (-(1/2) lap + w - |v|^2 + mu |v|^4 - Omega Lz) v  is
the palindromic composition

    V(dt/2)  K(dt/2)  R(Omega dt)  K(dt/2)  V(dt/2)

with V the pointwise nonlinear phase, K the exact free flight (Fourier
multiplier), and R the z-rotation realized as three spectral shears (plus
exact quarter turns).  Every factor is an L2 isometry on the grid, so the
mass is conserved to rounding; the composition is second order in dt.  On
an angular harmonic f(r,z) e^{i n theta} the K/R block reduces to the free
flight times the exact phase e^{i n Omega dt}.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels, spectral
from .errors import AliasingError, SolverError
from .field import Field, ProblemParams, energy_terms, functionals, inner
from .grid import GridSpec, trap_potential, ksq
from .rng import SplitMix64

ALIAS_TAIL_LIMIT = 1e-4


@dataclass
class PropagatorConfig:
    dt: float
    t_final: float
    rotation_Omega: float = 0.0
    snapshot_every: int = 20

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_final < self.dt:
            raise ValueError("t_final must be at least dt")


@dataclass
class TrajectoryStats:
    times: list = dc_field(default_factory=list)
    mass_series: list = dc_field(default_factory=list)
    energy_series: list = dc_field(default_factory=list)
    angmom_series: list = dc_field(default_factory=list)
    dist_series: list = dc_field(default_factory=list)
    final_dt: float = 0.0
    aborted: bool = False


def harmonic_period(omega: float) -> float:
    """Trap period 2 pi / sqrt(2 omega) of the k=2 well."""
    return 2.0 * math.pi / math.sqrt(2.0 * omega)


from functools import lru_cache


@lru_cache(maxsize=16)
def _kinetic_phase(grid: GridSpec, dt: float):
    return np.exp(-0.5j * dt * ksq(grid))


@lru_cache(maxsize=16)
def _shear_phases(grid: GridSpec, omega_dt: float):
    """Cached shear multipliers of the three-shear rotation by -omega_dt."""
    phi = (-omega_dt) % (2.0 * math.pi)
    quarter = int(np.round(phi / (math.pi / 2)))
    resid = phi - quarter * (math.pi / 2)
    quarter %= 4
    t = -math.tan(resid / 2.0)
    s = math.sin(resid)
    k0 = grid.axis_wavenumbers(0).reshape(-1, 1, 1)
    x0 = grid.axis_coords(0).reshape(-1, 1, 1)
    k1 = grid.axis_wavenumbers(1).reshape(1, -1, 1)
    x1 = grid.axis_coords(1).reshape(1, -1, 1)
    ph_x = np.exp(-1j * t * k0 * x1)   # shear along axis 0 by t * x2
    ph_y = np.exp(-1j * s * k1 * x0)   # shear along axis 1 by s * x1
    return quarter, resid, ph_x, ph_y


def _rotation(u, grid: GridSpec, omega_dt: float):
    """e^{+i (Omega dt) Lz} u: evaluate u on coordinates rotated by -Omega dt."""
    if omega_dt == 0.0:
        return u
    quarter, resid, ph_x, ph_y = _shear_phases(grid, omega_dt)
    out = u
    if quarter:
        if grid.n1 != grid.n2 or grid.L1 != grid.L2:
            raise ValueError("quarter-turn rotation needs n1=n2 and L1=L2")
        for _ in range(quarter):
            out = np.roll(np.flip(np.swapaxes(out, 0, 1), axis=0), 1, axis=0)
    if resid != 0.0:
        import scipy.fft as sfft

        out = sfft.ifft(sfft.fft(out, axis=0) * ph_x, axis=0)
        out = sfft.ifft(sfft.fft(out, axis=1) * ph_y, axis=1)
        out = sfft.ifft(sfft.fft(out, axis=0) * ph_x, axis=0)
    return out


def step(u: Field, p: ProblemParams, cfg: PropagatorConfig,
         dt: float | None = None, tail_limit: float = ALIAS_TAIL_LIMIT) -> Field:
    """One Strang step; raises AliasingError when the spectral tail blows.

    The kinetic multiplier is radial in k, so it commutes with the rotation
    (to grid wrap level): the middle block K(dt/2) R K(dt/2) is applied as
    the single exact flow R(Omega dt) K(dt).
    """
    g = u.grid
    if dt is None:
        dt = cfg.dt
    w = trap_potential(g, p.omega, p.k)
    vals = kernels.phase_apply(u.values, w, p.mu, -0.5 * dt)
    vhat = spectral.fftn(vals)
    tail = _tail_fraction(vhat, g)
    if tail > tail_limit:
        raise AliasingError(tail)
    vals = spectral.ifftn(vhat * _kinetic_phase(g, dt))
    vals = _rotation(vals, g, cfg.rotation_Omega * dt)
    vals = kernels.phase_apply(vals, w, p.mu, -0.5 * dt)
    return Field(g, vals)


@lru_cache(maxsize=16)
def _tail_slabs(grid: GridSpec, shell: float):
    slabs = []
    for axis, n in enumerate(grid.shape):
        width = max(int(round(n * shell / 2)), 1)
        lo = n // 2 - width
        hi = n // 2 + width
        sl = [slice(None)] * 3
        sl[axis] = slice(lo, hi)  # fftfreq order: highest |k| sits mid-array
        slabs.append(tuple(sl))
    return tuple(slabs)


def _tail_fraction(uhat, grid: GridSpec, shell=1.0 / 6.0):
    total = kernels.norm2sq(uhat, 1.0)
    if total == 0.0:
        return 0.0
    acc = 0.0
    for sl in _tail_slabs(grid, shell):
        acc += kernels.norm2sq(np.ascontiguousarray(uhat[sl]), 1.0)
    return float(acc / total)


def max_phase_check(u: Field, p: ProblemParams, dt: float):
    """CFL-type sanity: dt * max |nonlinear phase| should stay below pi."""
    w = trap_potential(u.grid, p.omega, p.k)
    d = kernels.abs2(u.values)
    phase = np.abs(w - d + p.mu * d * d).max() * dt
    return phase < math.pi, phase


def propagate(u0: Field, p: ProblemParams, cfg: PropagatorConfig,
              dist_fn=None, verbose: int = 0) -> TrajectoryStats:
    """Repeated stepping with conservation snapshots.

    The time step halves whenever the aliasing monitor trips and never
    grows back.  A NaN aborts the run, keeping the last good snapshots.
    """
    ok, phase = max_phase_check(u0, p, cfg.dt)
    if not ok:
        raise SolverError("propagate",
                          f"dt * max phase = {phase:.3g} >= pi; reduce dt")
    stats = TrajectoryStats()
    u = u0
    t = 0.0
    dt = cfg.dt
    steps_done = 0

    def record(u, t):
        rep = functionals(u, p)
        stats.times.append(t)
        stats.mass_series.append(rep.mass)
        stats.energy_series.append(rep.energy)
        stats.angmom_series.append(rep.angmom)
        if dist_fn is not None:
            stats.dist_series.append(dist_fn(u))
        return rep

    record(u, 0.0)
    while t < cfg.t_final - 1e-12 * cfg.t_final:
        dt_eff = min(dt, cfg.t_final - t)
        try:
            u_next = step(u, p, cfg, dt=dt_eff)
        except AliasingError:
            if dt < 1e-12:
                stats.aborted = True
                break
            dt *= 0.5
            continue
        if not np.isfinite(u_next.values.view(np.float64)).all():
            stats.aborted = True
            break
        u = u_next
        t += dt_eff
        steps_done += 1
        if steps_done % cfg.snapshot_every == 0 or t >= cfg.t_final - 1e-12:
            rep = record(u, t)
            if verbose and (steps_done // cfg.snapshot_every) % verbose == 0:
                print(f"    t={t:.3f} E={rep.energy:.10f} M={rep.mass:.12f} "
                      f"L={rep.angmom:.10f}", flush=True)
    stats.final_dt = dt
    return stats


def sigma_norm_parts(u: Field, p: ProblemParams):
    terms = energy_terms(u, p)
    return terms.sigma_dot + terms.mass


def make_orbit_distance(u_star: Field, p: ProblemParams, phi_samples: int = 32,
                        refine: int = 16):
    """Sigma-distance to the orbit {e^{i theta} R_phi u*}.

    theta minimizes analytically (modulus of the Sigma inner product).  The
    phi dependence F(phi) = <u, R_phi (A u*)> is a trigonometric polynomial
    in the angular harmonics of the fields, so it is sampled on phi_samples
    rotated templates (precomputed once) and maximized on a zero-padded
    trigonometric interpolant.  Needs a square xy grid for the quarter turns.
    """
    g = u_star.grid
    if g.n1 != g.n2 or g.L1 != g.L2:
        raise ValueError("orbit distance needs n1=n2 and L1=L2")
    w = trap_potential(g, p.omega, p.k)
    # A u* with A = -(1/2) lap + w + 1 (the Sigma product operator)
    a_star = (spectral.ifftn(0.5 * ksq(g) * spectral.fftn(u_star.values))
              + (w + 1.0) * u_star.values)
    norm_star = sigma_norm_parts(u_star, p)
    dv = g.cell_volume
    phis = np.linspace(0.0, 2.0 * math.pi, phi_samples, endpoint=False)
    templates = [
        np.ascontiguousarray(spectral.rotate_xy(a_star, g, phi))
        for phi in phis
    ]

    def dist(u: Field) -> float:
        norm_u = sigma_norm_parts(u, p)
        samples = np.array(
            [np.vdot(tpl, u.values) * dv for tpl in templates]
        )
        coeffs = np.fft.fft(samples) / phi_samples
        fine = np.fft.ifft(
            np.concatenate([
                coeffs[: phi_samples // 2],
                np.zeros((refine - 1) * phi_samples, dtype=complex),
                coeffs[phi_samples // 2 :],
            ])
        ) * (refine * phi_samples)
        mags = np.abs(fine) ** 2
        j = int(np.argmax(mags))
        n = mags.size
        ym, y0, yp = mags[(j - 1) % n], mags[j], mags[(j + 1) % n]
        denom = ym - 2.0 * y0 + yp
        # parabolic peak through the three top samples of |F|^2
        if denom < 0.0:
            delta = 0.5 * (ym - yp) / denom
            peak = y0 - 0.25 * (ym - yp) * delta
        else:
            peak = y0
        best = math.sqrt(max(peak, 0.0))
        best = max(best, float(np.abs(samples).max()))
        d2 = norm_u + norm_star - 2.0 * best
        return math.sqrt(max(d2, 0.0))

    return dist


def perturbation_field(grid: GridSpec, p: ProblemParams, eps: float,
                       seed: int, cutoff_fraction: float = 0.25) -> Field:
    """Sigma-normalized random field of size eps.

    Complex white noise from SplitMix64, low-passed by a Gaussian envelope
    exp(-(|k| / (cutoff_fraction k_max))^2), then scaled to ||.||_Sigma = eps.
    """
    rng = SplitMix64(seed)
    noise = rng.complex_gaussian(grid.shape)
    kk = ksq(grid)
    kmax = math.pi / max(grid.spacings)
    envelope = np.exp(-kk / (cutoff_fraction * kmax) ** 2)
    vals = spectral.ifftn(spectral.fftn(noise) * envelope)
    f = Field(grid, vals)
    norm = math.sqrt(sigma_norm_parts(f, p))
    return Field(grid, (eps / norm) * vals)


def stability_experiment(u_star, eps: float, p: ProblemParams,
                         cfg: PropagatorConfig, seed: int = 0,
                         verbose: int = 0) -> TrajectoryStats:
    """Perturb a converged minimizer, propagate, track the orbit distance."""
    from .minimize import project_constraints

    field_star = u_star.field if hasattr(u_star, "field") else u_star
    grid = field_star.grid
    if eps > 0.0:
        delta = perturbation_field(grid, p, eps, seed)
        u0 = project_constraints(
            Field(grid, field_star.values + delta.values), p.m, p.l
        )
    else:
        u0 = field_star
    dist = make_orbit_distance(field_star, p)
    return propagate(u0, p, cfg, dist_fn=dist, verbose=verbose)

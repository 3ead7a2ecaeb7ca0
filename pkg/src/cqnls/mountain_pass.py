"""Mountain-pass machinery: the dilation path, string relaxation, saddle.

The path family g(t) = tau(t)^{3/2} u2(tau(t) x), tau = t + l1(1-t), joins
the expanded copy (u2)_{l1} inside B_{rho/2} to u2 itself outside B_rho.
String relaxation lowers max-energy estimates of the min-max level; the
climbing step centers the peak node on the col, and the refinement stage
minimizes the squared constrained residual until the saddle is stationary.
"""

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import spectral
from .errors import BracketError, SolverError, ResolutionWarning
from .field import (
    Field,
    ProblemParams,
    apply_lz,
    dilate,
    energy_terms,
    functionals,
    gradient,
    hessian_vector,
    inner,
)
from .grid import GridSpec, trap_potential
from .minimize import (
    MinimizerConfig,
    SolverResult,
    _is_real,
    _precondition,
    fit_multipliers,
    project_constraints,
)


@dataclass
class PathSpec:
    node_count: int = 33
    reparam_every: int = 4
    relax_iters: int = 60
    climb: bool = True

    def __post_init__(self):
        if self.node_count < 8:
            raise ValueError("node_count must be >= 8")
        if self.reparam_every < 1:
            raise ValueError("reparam_every must be >= 1")


@dataclass
class PathResult:
    nodes: list
    energies: list
    gamma: float
    saddle: SolverResult | None
    l_star: float
    l_upper: float
    l1: float
    taus: list
    gamma_history: list = dc_field(default_factory=list, repr=False)


def h_from_terms(kinetic: float, trap: float, l: float, p: ProblemParams):
    if not l > 0:
        raise ValueError("h(l) needs l > 0")
    return l * l * kinetic + trap * l ** (-p.k)


def h_profile(u: Field, l: float, p: ProblemParams) -> float:
    """(l^2/2)||grad u||^2 + omega l^{-k} ||x^{k/2} u||^2."""
    rep = functionals(u, p)
    return h_from_terms(rep.kinetic, rep.trap, l, p)


def l0(u: Field, p: ProblemParams) -> float:
    """Minimizer of h: (k omega ||x^{k/2}u||^2 / ||grad u||^2)^{1/(k+2)}."""
    rep = functionals(u, p)
    if rep.kinetic <= 0:
        raise ValueError("l0 needs a nonzero kinetic term")
    return (p.k * rep.trap / (2.0 * rep.kinetic)) ** (1.0 / (p.k + 2.0))


def _bisect_h(kin, trap, p, lo, hi, target, iters=200):
    flo = h_from_terms(kin, trap, lo, p) - target
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = h_from_terms(kin, trap, mid, p) - target
        if fm == 0.0 or (hi - lo) < 1e-16 * hi:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bracket_l(u2: Field, p: ProblemParams):
    """Roots l_* < l0 < l^* of h(l) = rho/2 and l1 = sqrt(l_* l^*).

    Requires the small-trap regime inf h < rho/2; the returned l1 places
    (u2)_{l1} inside B_{rho/2}, verified on the grid.
    """
    rep = functionals(u2, p)
    kin, trap = rep.kinetic, rep.trap
    ell0 = (p.k * trap / (2.0 * kin)) ** (1.0 / (p.k + 2.0))
    h0 = h_from_terms(kin, trap, ell0, p)
    half = 0.5 * p.rho
    if not h0 < half:
        raise BracketError(
            f"inf h = h(l0) = {h0:.6g} >= rho/2 = {half:.6g}: the trap is too "
            f"strong for the dilation bracket (gap {h0 - half:.3g}); use the "
            "local-minimizer base-point fallback"
        )
    hi = ell0
    while h_from_terms(kin, trap, hi, p) < half:
        hi *= 1.5
    l_upper = _bisect_h(kin, trap, p, ell0, hi, half)
    lo = ell0
    while h_from_terms(kin, trap, lo, p) < half:
        lo /= 1.5
    l_star = _bisect_h(kin, trap, p, ell0, lo, half)
    l1 = math.sqrt(l_star * l_upper)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionWarning)
        probe = dilate(u2, l1)
    sig = energy_terms(probe, p).sigma_dot
    if sig > half * (1.0 + 1e-3):
        raise SolverError(
            "bracket",
            f"dilate(u2, l1) has sigma_dot = {sig:.6g} > rho/2 on the grid",
        )
    return l_star, l_upper, l1


def initial_path(u2: Field, l1: float, spec: PathSpec, p: ProblemParams) -> PathResult:
    """Dilation path nodes tau_j = t_j + l1 (1 - t_j), t_j = j/(P-1)."""
    P = spec.node_count
    taus = [j / (P - 1) + l1 * (1.0 - j / (P - 1)) for j in range(P)]
    nodes = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionWarning)
        for j, tau in enumerate(taus):
            node = dilate(u2, tau)
            if j != P - 1:
                node = project_constraints(node, p.m, p.l)
            nodes.append(node)
    energies = [energy_terms(n, p).energy for n in nodes]
    gamma = max(energies)
    return PathResult(
        nodes=nodes, energies=energies, gamma=gamma, saddle=None,
        l_star=math.nan, l_upper=math.nan, l1=l1, taus=taus,
        gamma_history=[gamma],
    )


def _sigma_dot_dist(a: Field, b: Field, p: ProblemParams):
    delta = Field(a.grid, a.values - b.values)
    return math.sqrt(max(energy_terms(delta, p).sigma_dot, 0.0))


def _project_or_rescale(vals, grid, p, real_mode):
    if real_mode:
        tv = vals.real
        tv = tv * math.sqrt(p.m / ((tv * tv).sum() * grid.cell_volume))
        return Field(grid, tv.astype(np.complex128))
    return project_constraints(Field(grid, vals), p.m, p.l)


def _reparametrize(nodes, p, real_mode):
    """Equal Sigma-dot arclength redistribution with re-projection."""
    P = len(nodes)
    seg = [_sigma_dot_dist(nodes[j + 1], nodes[j], p) for j in range(P - 1)]
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total == 0.0:
        return nodes
    targets = np.linspace(0.0, total, P)
    out = [nodes[0]]
    grid = nodes[0].grid
    for j in range(1, P - 1):
        t = targets[j]
        idx = int(np.searchsorted(s, t, side="right") - 1)
        idx = min(max(idx, 0), P - 2)
        w = 0.0 if seg[idx] == 0 else (t - s[idx]) / seg[idx]
        vals = (1.0 - w) * nodes[idx].values + w * nodes[idx + 1].values
        out.append(_project_or_rescale(vals, grid, p, real_mode))
    out.append(nodes[-1])
    return out


def string_relax(path: PathResult, p: ProblemParams, spec: PathSpec,
                 cfg: MinimizerConfig, verbose: int = 0) -> PathResult:
    """Relax interior nodes by projected descent; endpoints stay pinned.

    gamma (the running path maximum) is non-increasing across sweeps: node
    steps are accepted only on energy decrease, reparametrization sweeps are
    followed by descent before gamma is recorded, and climbing steps are
    clipped at the recorded gamma.
    """
    nodes = list(path.nodes)
    P = len(nodes)
    grid = nodes[0].grid
    w = trap_potential(grid, p.omega, p.k)
    real_mode = p.l == 0.0 and all(_is_real(n.values) for n in nodes)
    energies = [energy_terms(n, p).energy for n in nodes]
    gamma = max(energies)
    gamma_hist = list(path.gamma_history) or [gamma]
    endpoint_max = max(energies[0], energies[-1])
    steps = [cfg.step0] * P
    omegas = [0.0] * P
    dv = grid.cell_volume

    def node_residual(u):
        g = gradient(u, p)
        if real_mode:
            lam = inner(u, g).real / p.m
            r = (g.values.real - lam * u.values.real).astype(np.complex128)
            return r, lam, 0.0
        v = apply_lz(u)
        lam, om, _ = fit_multipliers(u, g, v)
        return g.values - lam * u.values - om * v.values, lam, om

    for sweep in range(spec.relax_iters):
        if spec.reparam_every and sweep and sweep % spec.reparam_every == 0:
            nodes = _reparametrize(nodes, p, real_mode)
            energies = [energy_terms(n, p).energy for n in nodes]
        peak = int(np.argmax(energies))
        for j in range(1, P - 1):
            u = nodes[j]
            r, lam, omegas[j] = node_residual(u)
            c = max(abs(lam), 1e-3) if cfg.precond_shift is None else cfg.precond_shift
            d = _precondition(r, grid, w, c) if c > 0 else r
            if real_mode:
                d = d.real
            climbing = (spec.climb and j == peak and 0 < peak < P - 1)
            if climbing:
                tan = nodes[j + 1].values - nodes[j - 1].values
                tnorm = math.sqrt((np.abs(tan) ** 2).sum() * dv)
                if tnorm > 0:
                    tan = tan / tnorm
                    proj = (np.vdot(tan, d).real * dv)
                    d = d - 2.0 * proj * tan
                    if real_mode:
                        d = d.real
            step = steps[j]
            for _ in range(40):
                trial = _project_or_rescale(u.values - step * d, grid, p,
                                            real_mode)
                te = energy_terms(trial, p).energy
                ok = (te <= gamma + 1e-12 * max(1.0, abs(gamma))
                      if climbing else
                      te <= energies[j] + 1e-13 * max(1.0, abs(energies[j])))
                if ok:
                    nodes[j] = trial
                    energies[j] = te
                    steps[j] = min(step * 1.3, 50.0)
                    break
                step *= cfg.backtrack_factor
                steps[j] = step
        gamma_new = max(energies)
        if gamma_new <= gamma + 1e-12 * max(1.0, abs(gamma)):
            gamma = min(gamma, gamma_new)
        gamma_hist.append(gamma)
        if verbose and sweep % verbose == 0:
            print(f"    sweep {sweep}: gamma={gamma:.8f} peak={peak}",
                  flush=True)
        if gamma < endpoint_max:
            raise SolverError(
                "string-relax",
                f"gamma {gamma:.6g} collapsed below the endpoint level "
                f"{endpoint_max:.6g}: the path left the barrier",
            )
    return PathResult(
        nodes=nodes, energies=energies, gamma=gamma, saddle=path.saddle,
        l_star=path.l_star, l_upper=path.l_upper, l1=path.l1,
        taus=path.taus, gamma_history=gamma_hist,
    )


def refine_saddle(path: PathResult, p: ProblemParams, cfg: MinimizerConfig,
                  u1_result: SolverResult | None = None,
                  u2_result: SolverResult | None = None,
                  energy_tol: float = 1e-4,
                  verbose: int = 0) -> SolverResult:
    """Polish the max-energy node into a stationary point of E|_S(m,l).

    Minimizes Phi = (1/2)||Eop(u) - lambda u - Omega Lz u||^2 with the
    multipliers refit every step, gradient (E''(u) - lambda - Omega Lz) r.
    """
    grid = path.nodes[0].grid
    w = trap_potential(grid, p.omega, p.k)
    peak = int(np.argmax(path.energies))
    u = path.nodes[peak]
    real_mode = p.l == 0.0 and _is_real(u.values)
    endpoint_max = max(path.energies[0], path.energies[-1])
    dv = grid.cell_volume

    def residual(u):
        g = gradient(u, p)
        if real_mode:
            lam = inner(u, g).real / p.m
            return g.values.real - lam * u.values.real, lam, 0.0
        v = apply_lz(u)
        lam, om, _ = fit_multipliers(u, g, v)
        return g.values - lam * u.values - om * v.values, lam, om

    r, lam, om = residual(u)
    phi = 0.5 * (np.abs(r) ** 2).sum() * dv
    step = cfg.step0
    kkt = math.sqrt(2.0 * phi)
    it = 0
    for it in range(cfg.max_iters):
        kkt = math.sqrt(2.0 * phi)
        if verbose and it % verbose == 0:
            print(f"    saddle it {it}: kkt={kkt:.3e} lam={lam:.5f} "
                  f"step={step:.2e}", flush=True)
        if kkt <= cfg.grad_tol:
            break
        rf = Field(grid, np.ascontiguousarray(r, dtype=np.complex128))
        hv = hessian_vector(u, rf, p).values - lam * r
        if not real_mode and om != 0.0:
            hv = hv - om * apply_lz(rf).values
        c = max(abs(lam), 1e-3) if cfg.precond_shift is None else cfg.precond_shift
        if c > 0:
            d = _precondition(_precondition(hv, grid, w, c), grid, w, c)
        else:
            d = hv
        if real_mode:
            d = d.real
        accepted = False
        for _ in range(50):
            trial = _project_or_rescale(u.values - step * d, grid, p, real_mode)
            tr, tlam, tom = residual(trial)
            tphi = 0.5 * (np.abs(tr) ** 2).sum() * dv
            if tphi < phi:
                u, r, lam, om, phi = trial, tr, tlam, tom, tphi
                step = min(step * 1.3, 50.0)
                accepted = True
                break
            step *= cfg.backtrack_factor
        if not accepted:
            break
        te = energy_terms(u, p).energy
        if te < endpoint_max:
            raise SolverError(
                "saddle",
                f"refinement descended into an endpoint basin "
                f"(E = {te:.6g} < {endpoint_max:.6g}): path resolution failed",
            )
    rep = functionals(u, p)
    kkt = math.sqrt(2.0 * phi)
    result = SolverResult(u, lam, om, rep, kkt, it + 1,
                          "saddle" if kkt <= cfg.grad_tol else "unconverged")
    if kkt <= cfg.grad_tol:
        gap = abs(rep.energy - path.gamma)
        if gap > energy_tol * max(abs(path.gamma), 1e-300):
            raise SolverError(
                "saddle",
                f"|E(u3) - gamma| = {gap:.3e} exceeds {energy_tol:g} relative",
            )
        if u1_result is not None and u2_result is not None:
            e1 = u1_result.report.energy
            e2 = u2_result.report.energy
            if not (e2 < 0.0 < e1 < rep.energy):
                raise SolverError(
                    "saddle",
                    f"energy ordering violated: E2={e2:.6g} E1={e1:.6g} "
                    f"E3={rep.energy:.6g}",
                )
            s1 = u1_result.report.sigma_dot
            s2 = u2_result.report.sigma_dot
            if not (s1 < rep.sigma_dot < s2):
                raise SolverError(
                    "saddle",
                    f"sigma_dot ordering violated: {s1:.6g}, "
                    f"{rep.sigma_dot:.6g}, {s2:.6g}",
                )
    return result


def initial_path_from_local(u1: Field, u2: Field, spec: PathSpec,
                            p: ProblemParams) -> PathResult:
    """Fallback path base point (projected linear interpolation u1 -> u2).

    Used when bracket_l reports the strong-trap regime; carries no
    energy-level guarantees.
    """
    P = spec.node_count
    real_mode = p.l == 0.0 and _is_real(u1.values) and _is_real(u2.values)
    nodes = [u1]
    for j in range(1, P - 1):
        t = j / (P - 1)
        vals = (1.0 - t) * u1.values + t * u2.values
        nodes.append(_project_or_rescale(vals, u1.grid, p, real_mode))
    nodes.append(u2)
    energies = [energy_terms(n, p).energy for n in nodes]
    gamma = max(energies)
    return PathResult(
        nodes=nodes, energies=energies, gamma=gamma, saddle=None,
        l_star=math.nan, l_upper=math.nan, l1=math.nan,
        taus=[j / (P - 1) for j in range(P)], gamma_history=[gamma],
    )

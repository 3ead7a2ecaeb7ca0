"""Sharp interpolation constants used by the threshold estimates.

S4 is the best constant in  ||u||_4^4 <= S4 ||grad u||_2^3 ||u||_2  on R^3,
computed from the radial ground state of

    -U'' - (2/r) U' + (1/3) U = (2/3) U^3,   U'(0) = 0,  U(r) -> 0,

via S4 = 4 / (2 ||U||_2^2).  Ssob is the best constant in
||u||_6^6 <= Ssob ||grad u||_2^6, evaluated on the Aubin-Talenti bubble
3^{1/4} (eps / (eps^2 + r^2))^{1/2} by radial quadrature.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, simpson, solve_ivp

from .errors import BracketError

SHOOT_RMAX = 30.0
SHOOT_BRACKET = (1.0, 6.0)
SHOOT_RESIDUAL = 1e-10


@dataclass(frozen=True)
class SharpConstants:
    S4: float
    Ssob: float
    U4_mass: float

    def __post_init__(self):
        if not (self.S4 > 0 and self.Ssob > 0 and self.U4_mass > 0):
            raise ValueError("sharp constants must be positive")
        if abs(self.S4 * 2.0 * self.U4_mass - 4.0) > 1e-12 * 4.0:
            raise ValueError("S4 != 4/(2 ||U4||_2^2)")


def _ode_rhs(r, y):
    u, up = y
    return (up, (u / 3.0 - 2.0 * u**3 / 3.0) - 2.0 * up / r)


def _classify(beta, rmax):
    """'high' if U crosses zero (beta too large), 'low' if U turns back up."""
    r0 = 1e-8
    g0 = beta / 3.0 - 2.0 * beta**3 / 3.0
    y0 = (beta + g0 * r0 * r0 / 6.0, g0 * r0 / 3.0)

    def hit_zero(r, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1

    def turn_up(r, y):
        return y[1] - 1e-14

    turn_up.terminal = True
    turn_up.direction = 1

    sol = solve_ivp(
        _ode_rhs,
        (r0, rmax),
        y0,
        events=(hit_zero, turn_up),
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
    )
    if sol.t_events[0].size:
        return "high"
    if sol.t_events[1].size:
        return "low"
    return "low"  # ran out the domain while still positive and decreasing


def shoot_u4(rmax=SHOOT_RMAX, bracket=SHOOT_BRACKET, residual=SHOOT_RESIDUAL):
    """Ground-state shooting; returns (r, U(r)) on a dense profile grid."""
    lo, hi = bracket
    clo, chi = _classify(lo, rmax), _classify(hi, rmax)
    if not (clo == "low" and chi == "high"):
        raise BracketError(
            f"shooting bracket [{lo}, {hi}] classifies as ({clo}, {chi}); "
            "ground state not bracketed"
        )
    while hi - lo > residual:
        mid = 0.5 * (lo + hi)
        if _classify(mid, rmax) == "low":
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)

    r0 = 1e-8
    g0 = beta / 3.0 - 2.0 * beta**3 / 3.0
    y0 = (beta + g0 * r0 * r0 / 6.0, g0 * r0 / 3.0)

    def tiny(r, y):
        return y[0] - 1e-9

    tiny.terminal = True
    tiny.direction = -1

    sol = solve_ivp(
        _ode_rhs,
        (r0, rmax),
        y0,
        events=(tiny,),
        method="DOP853",
        rtol=1e-13,
        atol=1e-15,
        dense_output=True,
    )
    rr = np.linspace(r0, sol.t[-1], 20001)
    return rr, sol.sol(rr)[0], sol.sol(rr)[1]


@lru_cache(maxsize=1)
def gn_constant():
    """(S4, ||U4||_2^2) from the shooting profile."""
    rr, U, _ = shoot_u4()
    u4_mass = 4.0 * np.pi * simpson(U**2 * rr**2, x=rr)
    return 4.0 / (2.0 * u4_mass), u4_mass


def _bubble_moments(eps):
    def p6(r):
        return 4.0 * np.pi * 3.0**1.5 * r**2 * (eps / (eps**2 + r**2)) ** 3

    def g2(r):
        return 4.0 * np.pi * 3.0**0.5 * eps * r**4 / (eps**2 + r**2) ** 3

    i6, e6 = quad(p6, 0.0, np.inf, epsabs=1e-13, epsrel=1e-13)
    ig, eg = quad(g2, 0.0, np.inf, epsabs=1e-13, epsrel=1e-13)
    if e6 > 1e-9 * abs(i6) or eg > 1e-9 * abs(ig):
        raise BracketError("Sobolev quadrature did not converge")
    return i6, ig


@lru_cache(maxsize=8)
def sobolev_constant(eps=1.0):
    """||U_eps||_6^6 / ||grad U_eps||_2^6; dilation-invariant in eps."""
    i6, ig = _bubble_moments(float(eps))
    return i6 / ig**3


@lru_cache(maxsize=1)
def sharp_constants() -> SharpConstants:
    s4, u4_mass = gn_constant()
    return SharpConstants(S4=s4, Ssob=sobolev_constant(1.0), U4_mass=u4_mass)

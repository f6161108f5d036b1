"""Ground-mode filament profiles by shooting on the radial Helmholtz equation.

The transverse mode ``E_t(r)`` of a self-trapped filament satisfies

    E'' + E'/r + (k0^2 eps(E^2) - beta^2) E = 0,   E(0) = e0, E'(0) = 0,

and the ground mode is the nodeless solution that decays like ``K0(kappa r)``
with ``kappa = sqrt(beta^2 - k0^2 eps_lin)``.  ``beta`` is found by bisection
on the shooting classification: too small and the solution crosses zero,
too large and it turns back up before decaying.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import k0e, k1e

from .medium import MediumParams, WaveParams, epsilon_of_intensity

log = logging.getLogger(__name__)


class IntegrationBlowup(RuntimeError):
    def __init__(self, radius: float, msg: str = "non-finite state in radial integration"):
        super().__init__(f"{msg} at r={radius:.6g}")
        self.radius = radius


class NoBracketError(RuntimeError):
    """The medium cannot self-trap at the requested amplitude."""


class Tail(enum.Enum):
    DIVERGING = "diverging-positive"
    OSCILLATING = "oscillating"
    DECAYED = "decayed"


@dataclass
class ShotResult:
    tail: Tail
    r_end: float
    value: float
    sol: object = field(default=None, repr=False)


@dataclass
class RadialProfile:
    r_grid: np.ndarray
    e_t: np.ndarray
    de_t: np.ndarray
    beta: float
    power: float
    kappa: float

    @property
    def e0(self) -> float:
        return float(self.e_t[0])

    @property
    def dr(self) -> float:
        return float(self.r_grid[1] - self.r_grid[0])

    @property
    def r_max(self) -> float:
        return float(self.r_grid[-1])

    def __call__(self, r):
        """Linear interpolation of ``E_t``; zero beyond the grid."""
        return np.interp(r, self.r_grid, self.e_t, right=0.0)

    def derivative(self, r):
        return np.interp(r, self.r_grid, self.de_t, right=0.0)

    def core_radius(self, fraction: float = 1e-3) -> float:
        """Radius beyond which ``|E_t|`` stays below ``fraction * e0``."""
        above = np.nonzero(np.abs(self.e_t) >= fraction * abs(self.e_t[0]))[0]
        return float(self.r_grid[above[-1]])


@dataclass
class PowerCurve:
    peak_amplitudes: list
    powers: list
    critical_power: float
    betas: list = field(default_factory=list)


@dataclass
class Tolerances:
    """Shooting knobs.  ``dr``/``r_max`` default to values derived from kappa."""

    beta_rtol: float = 1e-12
    ode_rtol: float = 1e-12
    ode_atol: float = 1e-15
    dr: float | None = None
    r_max: float | None = None
    kappa_r_max: float = 40.0
    kappa_dr: float = 5e-4
    match_ratio: float = 1e3


def _series_start(e0, beta, p, w, r_start):
    # E ~ e0 (1 - a r^2) with 4a = k0^2 eps(e0^2) - beta^2
    a = (w.k0**2 * epsilon_of_intensity(e0 * e0, p) - beta * beta) / 4.0
    return [e0 * (1.0 - a * r_start**2), -2.0 * a * e0 * r_start]


def _rhs_factory(p: MediumParams, w: WaveParams, beta: float):
    k02 = w.k0**2
    b2 = beta * beta
    eps_lin, d_eps, i_sat = p.eps_lin, p.d_eps, p.i_sat
    kerr = math.isinf(i_sat)

    def rhs(r, y):
        e, de = y
        i = e * e
        deps = d_eps * i if kerr else d_eps * i / (1.0 + i / i_sat)
        return [de, -de / r - (k02 * (eps_lin + deps) - b2) * e]

    return rhs


def _zero_crossing(r, y):
    return y[0]


_zero_crossing.terminal = True
_zero_crossing.direction = -1


def _turn_up(r, y):
    return y[1]


_turn_up.terminal = True
_turn_up.direction = 1


def shoot(e0, beta, p: MediumParams, w: WaveParams, r_max, dr=None, tol: Tolerances | None = None,
          dense=False) -> ShotResult:
    """Integrate outward from ``E(0)=e0`` and classify the tail.

    ``dr`` caps the adaptive step.  Returns the classification, the radius
    where integration stopped and the field value there.
    """
    if not e0 > 0:
        raise ValueError("e0 must be > 0")
    tol = tol or Tolerances()
    if beta * beta >= w.k0**2 * epsilon_of_intensity(e0 * e0, p):
        # focusing term is nonpositive at r=0 already
        return ShotResult(Tail.DIVERGING, 0.0, e0)
    r_start = 1e-6 / max(w.k0, 1e-300)
    y0 = _series_start(e0, beta, p, w, r_start)
    sol = solve_ivp(
        _rhs_factory(p, w, beta),
        (r_start, r_max),
        y0,
        method="DOP853",
        rtol=tol.ode_rtol,
        atol=tol.ode_atol * e0,
        max_step=dr if dr else np.inf,
        events=[_zero_crossing, _turn_up],
        dense_output=dense,
    )
    if not np.all(np.isfinite(sol.y[:, -1])):
        raise IntegrationBlowup(float(sol.t[-1]))
    if sol.status == -1:
        raise IntegrationBlowup(float(sol.t[-1]), sol.message)
    if sol.t_events[0].size:
        tail = Tail.OSCILLATING
    elif sol.t_events[1].size:
        tail = Tail.DIVERGING
    else:
        tail = Tail.DECAYED
    return ShotResult(tail, float(sol.t[-1]), float(sol.y[0, -1]), sol if dense else None)


def beta_bracket(e0, p: MediumParams, w: WaveParams):
    """Open interval of propagation constants between the linear and peak light lines."""
    lo = w.k_lin(p)
    hi = w.k0 * math.sqrt(epsilon_of_intensity(e0 * e0, p))
    return lo, hi


def solve_profile(e0, p: MediumParams, w: WaveParams, tol: Tolerances | None = None) -> RadialProfile:
    tol = tol or Tolerances()
    if not e0 > 0:
        raise ValueError("e0 must be > 0")
    lo, hi = beta_bracket(e0, p, w)
    if not hi > lo * (1 + 4 * tol.beta_rtol):
        raise NoBracketError(f"no guided mode at e0={e0}: peak index equals background")

    # the largest possible kappa bounds the decay length from below
    kappa_hi = math.sqrt(hi * hi - lo * lo)
    r_search = tol.r_max or 4 * tol.kappa_r_max / kappa_hi
    while True:
        s_lo = shoot(e0, lo * (1 + tol.beta_rtol), p, w, r_search, tol=tol)
        if s_lo.tail is Tail.OSCILLATING:
            break
        if tol.r_max or r_search > 1e9 / w.k0:
            raise NoBracketError(f"lower bracket does not oscillate at e0={e0}")
        r_search *= 4
    s_hi = shoot(e0, hi, p, w, r_search, tol=tol)
    if s_hi.tail is not Tail.DIVERGING:
        raise NoBracketError(f"upper bracket does not diverge at e0={e0}")

    b_lo, b_hi = lo * (1 + tol.beta_rtol), hi
    while (b_hi - b_lo) > tol.beta_rtol * b_hi:
        mid = 0.5 * (b_lo + b_hi)
        kap = math.sqrt(max(mid * mid - lo * lo, 0.0))
        r_lim = tol.r_max or max(r_search, 4 * tol.kappa_r_max / max(kap, 1e-300))
        s = shoot(e0, mid, p, w, r_lim, tol=tol)
        if s.tail is Tail.OSCILLATING:
            b_lo = mid
        elif s.tail is Tail.DIVERGING:
            b_hi = mid
        else:
            # decayed to r_lim without turning: as converged as shooting can tell
            b_lo = b_hi = mid
            break
    beta = 0.5 * (b_lo + b_hi)
    return _assemble(e0, beta, b_hi, p, w, tol)


def _assemble(e0, beta, beta_div, p, w, tol: Tolerances) -> RadialProfile:
    k_lin = w.k_lin(p)
    kappa = math.sqrt(beta * beta - k_lin * k_lin)
    lam = w.lambda_med
    dr = tol.dr or min(lam / 50, tol.kappa_dr / kappa)
    r_max = tol.r_max or tol.kappa_r_max / kappa

    # the diverging side turns up at the radius where its error mode dominates
    shot = shoot(e0, beta_div, p, w, 10 * r_max, tol=tol, dense=True)
    sol = shot.sol
    r_turn = shot.r_end
    e_turn = abs(shot.value)
    # trust the integration while the error mode is negligible, then continue with K0
    r_dense = np.linspace(sol.t[0], r_turn, 20001)
    e_dense = sol.sol(r_dense)[0]
    ok = np.nonzero(e_dense >= tol.match_ratio * e_turn)[0]
    r_match = float(r_dense[ok[-1]]) if ok.size else float(sol.t[0])
    r_match = min(r_match, r_max)

    n = int(round(r_max / dr))
    r = np.linspace(0.0, n * dr, n + 1)
    e = np.empty_like(r)
    de = np.empty_like(r)
    inner = r <= r_match
    rin = np.maximum(r[inner], sol.t[0])
    y = sol.sol(rin)
    e[inner], de[inner] = y[0], y[1]
    e[0], de[0] = e0, 0.0
    e_m, de_m = sol.sol(r_match)
    x_m = kappa * r_match
    outer = ~inner
    x = kappa * r[outer]
    # scaled Bessel functions avoid underflow far out
    scale = np.exp(-(x - x_m))
    e[outer] = e_m * k0e(x) / k0e(x_m) * scale
    de[outer] = -kappa * e_m * k1e(x) / k0e(x_m) * scale
    log.debug("profile e0=%g beta=%.15g kappa=%g r_match=%g r_turn=%g", e0, beta, kappa, r_match, r_turn)
    prof = RadialProfile(r_grid=r, e_t=e, de_t=de, beta=beta, power=0.0, kappa=kappa)
    prof.power = power_of(prof)
    return prof


def power_of(profile: RadialProfile) -> float:
    """Transverse flux ``int E_t^2 2 pi r dr`` by the trapezoid rule."""
    r = profile.r_grid
    return float(np.trapezoid(profile.e_t**2 * 2 * np.pi * r, r))


def ode_residual(profile: RadialProfile, p: MediumParams, w: WaveParams, stride: int = 1) -> np.ndarray:
    """Centered-difference residual of the radial equation at interior samples."""
    r = profile.r_grid[::stride]
    e = profile.e_t[::stride]
    h = r[1] - r[0]
    d2 = (e[2:] - 2 * e[1:-1] + e[:-2]) / h**2
    d1 = (e[2:] - e[:-2]) / (2 * h)
    rc = r[1:-1]
    eps = epsilon_of_intensity(e[1:-1] ** 2, p)
    return d2 + d1 / rc + (w.k0**2 * eps - profile.beta**2) * e[1:-1]


def townes_norm(profile: RadialProfile, p: MediumParams, w: WaveParams) -> float:
    """Power rescaled to the focusing 2D NLS normalization, ``P k0^2 d_eps``.

    In the pure-Kerr limit this is the Townes constant.
    """
    return profile.power * w.k0**2 * p.d_eps


def critical_power(p: MediumParams, w: WaveParams, amplitude_range, tol: Tolerances | None = None) -> PowerCurve:
    """Sweep the peak amplitude and extrapolate the power to the trapping threshold.

    The threshold of the rational saturable response is ``e0 -> 0``; the two
    lowest successful amplitudes are extrapolated linearly in ``e0^2``.
    """
    amps = sorted(float(a) for a in amplitude_range)
    if len(amps) < 2 or amps[-1] < 10 * amps[0]:
        raise ValueError("amplitude_range must span at least one decade")
    ok_a, ok_p, ok_b = [], [], []
    for a in amps:
        try:
            prof = solve_profile(a, p, w, tol)
        except NoBracketError as exc:
            log.info("skipping e0=%g: %s", a, exc)
            continue
        ok_a.append(a)
        ok_p.append(prof.power)
        ok_b.append(prof.beta)
    if not ok_a:
        raise NoBracketError("no amplitude in range admits a trapped mode")
    if len(ok_a) == 1:
        crit = ok_p[0]
    else:
        x1, x2 = ok_a[0] ** 2, ok_a[1] ** 2
        slope = (ok_p[1] - ok_p[0]) / (x2 - x1)
        crit = ok_p[0] - slope * x1
    return PowerCurve(ok_a, ok_p, float(crit), ok_b)

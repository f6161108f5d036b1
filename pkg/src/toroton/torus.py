"""Curved-filament index asymmetry, the curvature fixed point, and quantized tori.

A filament of the straight problem is laid along a circle of radius ``R``
(curvature ``C = 1/R``) with ``z = R alpha``.  Local coordinates are
``(r, theta, alpha)`` with ``rho = R + r cos(theta)`` the distance from the
torus axis, so ``theta = 0`` points away from the axis.  The magnetic
permeability increment depends on the cycle-averaged squared curl of the
field, whose longitudinal part picks up the factor ``(R/rho)^2``; the index
is therefore lower on the outside of the bend and the beam axis turns
inward.  ``gamma(C)`` compares that eikonal turning rate with the imposed
curvature; ``gamma = 1`` closes the filament into a torus.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GeometryError
from .medium import MediumParams, WaveParams, d_delta_mu, delta_mu, epsilon_of_intensity
from .radial import RadialProfile, Tolerances, solve_profile

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TorusGeometry:
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise GeometryError(f"major radius must be > 0, got {self.R}")

    @property
    def C(self) -> float:
        return 1.0 / self.R

    @classmethod
    def from_curvature(cls, C: float) -> "TorusGeometry":
        if not C > 0:
            raise GeometryError(f"curvature must be > 0, got {C}")
        return cls(1.0 / C)

    def rho(self, r, theta):
        return self.R + np.asarray(r) * np.cos(theta)

    def check(self, r_max: float):
        if not r_max < self.R:
            raise GeometryError(f"evaluation radius {r_max} reaches the torus axis (R={self.R})")


def _stretch(C, r, theta):
    """``rho / R = 1 + C r cos(theta)``, valid for ``C = 0`` too."""
    s = 1.0 + C * np.asarray(r) * np.cos(theta)
    if np.any(s <= 0):
        raise GeometryError("rho <= 0 inside the evaluation domain")
    return s


# -- curl-squared kernels ------------------------------------------------------

def curl_sq_straight(profile: RadialProfile, w: WaveParams, r, theta, terms: str = "full"):
    """Cycle-averaged ``|curl E|^2`` of the x-polarized straight filament.

    With ``E_r = E_t cos(theta)``, ``E_theta = -E_t sin(theta)`` and
    ``d/dz -> beta``: ``(beta^2 E_t^2 + E_t'^2 sin^2(theta)) / 2``.
    ``terms`` selects ``full``, ``longitudinal`` or ``transverse``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > profile.r_max):
        raise ValueError("r outside the profile grid")
    e = profile(r)
    de = profile.derivative(r)
    longi = 0.5 * profile.beta**2 * e**2
    trans = 0.5 * (de * np.sin(theta)) ** 2
    if terms == "longitudinal":
        return longi
    if terms == "transverse":
        return trans
    return longi + trans


def _d_periodic(f, h, axis):
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2 * h)


def curl_components_curved(e_r, e_theta, e_alpha, r, theta, s, C: float, s_periodic: bool = True):
    """Curl of a field sampled on a ``(r, theta, s)`` grid in curved cylindrical coordinates.

    ``s = R alpha`` is arc length along the bent axis so that ``C = 0`` is the
    straight cylinder.  Arrays have shape ``(len(r), len(theta), len(s))``;
    ``theta`` is a full periodic circle and ``s`` is treated as periodic
    unless ``s_periodic`` is false.  Second-order central differences.
    Returns ``(curl_r, curl_theta, curl_alpha)``.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(r <= 0):
        raise GeometryError("r grid must exclude the axis")
    rr = r[:, None, None]
    T3 = theta[None, :, None]
    stretch = _stretch(C, rr, T3)  # rho / R
    hth = theta[1] - theta[0]
    hs = s[1] - s[0]

    def d_r(f):
        return np.gradient(f, r, axis=0, edge_order=2)

    def d_th(f):
        return _d_periodic(f, hth, 1)

    def d_s(f):
        if s_periodic:
            return _d_periodic(f, hs, 2)
        return np.gradient(f, s, axis=2, edge_order=2)

    # (1/rho) d/dalpha == (R/rho) d/ds; rho E_alpha == R * stretch * E_alpha
    curl_r = (d_th(stretch * e_alpha) - rr * d_s(e_theta)) / (rr * stretch)
    curl_t = d_s(e_r) / stretch - d_r(stretch * e_alpha) / stretch
    curl_a = (d_r(rr * e_theta) - d_th(e_r)) / rr
    return curl_r, curl_t, curl_a


def filament_phasors(profile: RadialProfile, r, theta, s):
    """Complex amplitudes ``(E_r, E_theta, E_alpha)`` of the transported filament."""
    rr = np.asarray(r, dtype=float)[:, None, None]
    T3 = np.asarray(theta, dtype=float)[None, :, None]
    S3 = np.asarray(s, dtype=float)[None, None, :]
    e = profile(rr) * np.exp(1j * profile.beta * S3)
    e_r = e * np.cos(T3)
    e_t = -e * np.sin(T3)
    return e_r, e_t, np.zeros_like(e_r)


def curl_sq_curved_grid(profile: RadialProfile, r, theta, s, C: float):
    """Cycle-averaged ``|curl E|^2`` by finite differences on a curved grid."""
    comps = curl_components_curved(*filament_phasors(profile, r, theta, s), r, theta, s, C)
    return 0.5 * sum(np.abs(c) ** 2 for c in comps)


def curl_sq_curved(profile: RadialProfile, w: WaveParams, r, theta, C: float):
    """Closed-form cycle-averaged ``|curl E|^2`` of the bent filament.

    The longitudinal term of the straight expression gains ``(R/rho)^2``.
    """
    st = _stretch(C, r, theta)
    longi = curl_sq_straight(profile, w, r, theta, "longitudinal")
    trans = curl_sq_straight(profile, w, r, theta, "transverse")
    return longi / st**2 + trans


def reduction_constant(profile: RadialProfile, r, theta, s, C: float) -> float:
    """Smallest ``K`` with ``|curl2_curved(C) - curl2_straight| <= K C r`` on the grid."""
    curved = curl_sq_curved_grid(profile, r, theta, s, C)
    straight = curl_sq_curved_grid(profile, r, theta, s, 0.0)
    dev = np.abs(curved - straight)
    denom = C * np.asarray(r)[:, None, None]
    return float(np.max(dev / denom))


# -- index and deflection -------------------------------------------------------

@dataclass
class PolarGrid:
    """Midpoint radial samples and periodic angular samples over the core."""

    r_eval: float
    nr: int = 400
    ntheta: int = 128

    @property
    def r(self):
        h = self.r_eval / self.nr
        return (np.arange(self.nr) + 0.5) * h

    @property
    def theta(self):
        return 2 * np.pi * np.arange(self.ntheta) / self.ntheta

    @property
    def area_weights(self):
        return (self.r * (self.r_eval / self.nr))[:, None] * (2 * np.pi / self.ntheta)


def default_grid(profile: RadialProfile, fraction: float = 1e-3, nr: int = 400, ntheta: int = 128) -> PolarGrid:
    return PolarGrid(profile.core_radius(fraction), nr, ntheta)


def delta_index_field(profile: RadialProfile, p: MediumParams, w: WaveParams, C: float,
                      grid: PolarGrid | None = None):
    """Refractive index ``n(r, theta)`` of the bent filament; returns ``(r, theta, n)``."""
    grid = grid or default_grid(profile)
    if C > 0:
        TorusGeometry.from_curvature(C).check(grid.r_eval)
    r, th = grid.r[:, None], grid.theta[None, :]
    u = curl_sq_curved(profile, w, r, th, C)
    i = profile(r) ** 2
    n = np.sqrt(epsilon_of_intensity(i, p) * (1.0 + delta_mu(u, p)))
    return grid.r, grid.theta, n


def odd_moment(n, grid: PolarGrid, weight=None) -> float:
    """``int n cos(theta) w dA / int w dA`` (intensity weight by default)."""
    wgt = grid.area_weights if weight is None else grid.area_weights * weight
    return float(np.sum(n * np.cos(grid.theta)[None, :] * wgt) / np.sum(wgt))


def _deflection_terms(profile, p, w, C, grid):
    r = grid.r
    e = profile(r)
    wt = e**2
    dwt = 2 * e * profile.derivative(r)
    _, _, n = delta_index_field(profile, p, w, C, grid)
    area = grid.area_weights
    norm = np.sum(wt[:, None] * area)
    if not norm > 0:
        raise ValueError("zero-power profile")
    n_mean = np.sum(n * wt[:, None] * area) / norm
    # <dn/dx>_w = -int n dw/dx dA / int w dA, with x = r cos(theta) along rho
    grad_x = -np.sum(n * np.cos(grid.theta)[None, :] * dwt[:, None] * area) / norm
    return grad_x, n_mean


def ray_curvature(profile, p, w, C, grid: PolarGrid | None = None) -> float:
    """Inward eikonal curvature ``-<dn/drho>_w / <n>_w`` of the beam axis."""
    grid = grid or default_grid(profile)
    g, n_mean = _deflection_terms(profile, p, w, C, grid)
    return float(-g / n_mean)


def gamma_zero(profile, p, w, grid: PolarGrid | None = None) -> float:
    """``lim gamma(C)`` as ``C -> 0`` from the linearization in ``C``."""
    grid = grid or default_grid(profile)
    r, th = grid.r[:, None], grid.theta[None, :]
    longi = curl_sq_straight(profile, w, r, th, "longitudinal")
    u = longi + curl_sq_straight(profile, w, r, th, "transverse")
    i = profile(r) ** 2
    eps = epsilon_of_intensity(i, p)
    mu = 1.0 + delta_mu(u, p)
    n = np.sqrt(eps * mu)
    fprime = d_delta_mu(u, p)
    # d u / dC at C = 0 is -2 r cos(theta) * longitudinal
    dn_dC = n / (2 * mu) * fprime * (-2 * r * np.cos(th) * longi)
    e = profile(grid.r)
    wt = e**2
    dwt = 2 * e * profile.derivative(grid.r)
    area = grid.area_weights
    norm = np.sum(wt[:, None] * area)
    n_mean = np.sum(n * wt[:, None] * area) / norm
    dgrad = -np.sum(dn_dC * np.cos(th) * dwt[:, None] * area) / norm
    return float(-dgrad / n_mean)


def gamma_of_c(profile: RadialProfile, p: MediumParams, w: WaveParams, C: float,
               grid: PolarGrid | None = None) -> float:
    """Ratio of the eikonal turning rate to the imposed curvature."""
    if C < 0:
        raise GeometryError("curvature must be >= 0")
    if C == 0:
        return gamma_zero(profile, p, w, grid)
    return ray_curvature(profile, p, w, C, grid) / C


# -- fixed point ------------------------------------------------------------

@dataclass
class Crossing:
    c: float
    gamma: float
    stable: bool


@dataclass
class CurvatureScan:
    c_values: list
    gamma_values: list
    c0: float | None = None
    stability: bool = False
    crossings: list = field(default_factory=list)

    @property
    def r0(self):
        return None if self.c0 is None else 1.0 / self.c0

    def rows(self):
        return list(zip(self.c_values, self.gamma_values))


def _bisect_unity(fn, a, b, ga, gb, tol=1e-9, max_iter=200):
    """Bisect ``fn(c) = 1`` on a bracket where ``fn - 1`` changes sign."""
    c, g = (a, ga) if abs(ga - 1) < abs(gb - 1) else (b, gb)
    for _ in range(max_iter):
        if abs(g - 1) < tol:
            break
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        gm = fn(m)
        if (ga - 1) * (gm - 1) <= 0:
            b, gb = m, gm
        else:
            a, ga = m, gm
        c, g = m, gm
    return c, g


def scan_crossings(gamma_fn: Callable[[float], float], c_values: Sequence[float],
                   tol: float = 1e-9, rel_delta: float = 1e-3) -> CurvatureScan:
    """Tabulate ``gamma`` and refine every crossing of 1.

    A crossing is stable when ``gamma(C0 - d) > 1 > gamma(C0 + d)`` with
    ``d = rel_delta * C0``.  ``c0`` is the first stable crossing.
    """
    cs = [float(c) for c in c_values]
    gs = [float(gamma_fn(c)) for c in cs]
    scan = CurvatureScan(cs, gs)
    for (a, ga), (b, gb) in zip(zip(cs, gs), zip(cs[1:], gs[1:])):
        if ga == 1.0 and a != cs[0]:
            continue  # counted by the previous interval
        if (ga - 1) * (gb - 1) > 0 or (ga == 1.0 and gb == 1.0):
            continue
        c0, g0 = _bisect_unity(gamma_fn, a, b, ga, gb, tol)
        d = rel_delta * c0
        stable = gamma_fn(c0 - d) > 1.0 > gamma_fn(c0 + d)
        scan.crossings.append(Crossing(c0, g0, stable))
    for cr in scan.crossings:
        if cr.stable:
            scan.c0, scan.stability = cr.c, True
            break
    return scan


def find_fixed_point(profile: RadialProfile, p: MediumParams, w: WaveParams, c_range,
                     n_scan: int = 40, grid: PolarGrid | None = None) -> CurvatureScan:
    """Scan ``gamma(C)`` over ``c_range = (c_min, c_max)`` and locate the stable crossing.

    The scan is geometric when ``c_min > 0``.
    """
    grid = grid or default_grid(profile)
    c_min, c_max = c_range
    if c_max >= 1.0 / grid.r_eval:
        raise GeometryError(f"c_max={c_max} puts the torus axis inside the core (r_eval={grid.r_eval})")
    cs = np.geomspace(c_min, c_max, n_scan) if c_min > 0 else np.linspace(c_min, c_max, n_scan)
    return scan_crossings(lambda c: gamma_of_c(profile, p, w, c, grid), cs)


# -- quantization -------------------------------------------------------------

class NoTorusError(ValueError):
    pass


@dataclass
class TorusSolution:
    r0: float
    m: int
    lambda_adj: float
    energy: float
    freq_shift: float

    def to_dict(self):
        return asdict(self)


def quantize(r0: float, w: WaveParams, m_policy="nearest", delta: float = 0.1) -> list[TorusSolution]:
    """Winding numbers ``m`` with ``2 pi r0 = m * lambda_adj``.

    ``m_policy`` is ``"nearest"`` (the ``m`` minimizing ``|freq_shift - 1|``)
    or ``"all-within"`` (every ``m`` with ``|freq_shift - 1| <= delta``).
    Energies are left at zero; see :func:`torus_energy`.
    """
    if not r0 > 0:
        raise NoTorusError("r0 must be > 0")
    loops = 2 * math.pi * r0 / w.lambda_med
    if loops < 1:
        raise NoTorusError(f"2 pi r0 = {2 * math.pi * r0:.6g} is shorter than one wavelength")
    if m_policy == "nearest":
        lo = max(1, math.floor(loops))
        ms = [min((lo, lo + 1), key=lambda m: abs(m / loops - 1))]
    elif m_policy == "all-within":
        ms = [m for m in range(max(1, math.floor(loops * (1 - delta))), math.ceil(loops * (1 + delta)) + 1)
              if abs(m / loops - 1) <= delta]
    else:
        raise ValueError(f"unknown m_policy {m_policy!r}")
    out = []
    for m in ms:
        lam = 2 * math.pi * r0 / m
        out.append(TorusSolution(r0=r0, m=m, lambda_adj=lam, energy=0.0, freq_shift=w.lambda_med / lam))
    return out


def torus_energy(p_crit: float, solution: TorusSolution, eps_lin: float = 1.0) -> float:
    """Flux times loop transit time: ``P m lambda_adj sqrt(eps_lin)`` with ``c = 1``."""
    return p_crit * solution.m * solution.lambda_adj * math.sqrt(eps_lin)


# -- parameter sweeps -----------------------------------------------------------

@dataclass
class SweepCell:
    params: dict
    has_crossing: bool = False
    stable: bool = False
    c0: float | None = None
    gamma_min: float | None = None
    gamma_max: float | None = None
    error: str | None = None


def expand_grid(param_grid) -> list[dict]:
    """Cartesian product of ``{name: values}`` in key order, or a list passed through."""
    if isinstance(param_grid, dict):
        keys = list(param_grid)
        return [dict(zip(keys, vals)) for vals in itertools.product(*(param_grid[k] for k in keys))]
    return [dict(c) for c in param_grid]


def sweep_gamma(param_grid, c_range, base: MediumParams, k0: float = 1.0, e0: float = 1.0,
                n_scan: int = 40, grid_fraction: float = 1e-3, nr: int = 400, ntheta: int = 128,
                tol: Tolerances | None = None, workers: int = 1) -> list[SweepCell]:
    """Evaluate the fixed-point search over a grid of medium overrides.

    Keys are ``MediumParams`` fields plus ``e0``.  Cells that fail record the
    error instead of aborting the sweep; report order follows the grid.
    """
    cells = expand_grid(param_grid)
    profiles = {}

    def profile_for(pm: MediumParams, amp: float):
        key = (pm.eps_lin, pm.d_eps, pm.i_sat, amp)
        if key not in profiles:
            profiles[key] = solve_profile(amp, pm, WaveParams.from_k0(k0, pm), tol)
        return profiles[key]

    # profiles first, serially, so the cache is deterministic
    setups = []
    for cell in cells:
        over = dict(cell)
        amp = float(over.pop("e0", e0))
        try:
            pm = MediumParams(**{**asdict(base), **over})
            prof = profile_for(pm, amp)
            setups.append((pm, prof, None))
        except Exception as exc:  # noqa: BLE001 - recorded per cell
            setups.append((None, None, f"{type(exc).__name__}: {exc}"))

    def run(idx):
        pm, prof, err = setups[idx]
        out = SweepCell(params=cells[idx])
        if err:
            out.error = err
            return out
        try:
            wv = WaveParams.from_k0(k0, pm)
            grid = PolarGrid(prof.core_radius(grid_fraction), nr, ntheta)
            scan = find_fixed_point(prof, pm, wv, c_range, n_scan, grid)
        except Exception as exc:  # noqa: BLE001
            out.error = f"{type(exc).__name__}: {exc}"
            return out
        out.has_crossing = bool(scan.crossings)
        out.stable = scan.stability
        out.c0 = scan.c0
        out.gamma_min = min(scan.gamma_values)
        out.gamma_max = max(scan.gamma_values)
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(run, range(len(cells))))
    return [run(i) for i in range(len(cells))]

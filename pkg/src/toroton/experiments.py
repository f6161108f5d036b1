"""Propagation experiments on self-trapped filaments.

* perturbation stability of a single filament,
* coherent interaction of a filament pair versus relative phase,
* self-interference through a two-hole screen (Young geometry), with a
  single-hole control run and an independent linear fringe oracle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import bpm
from .bpm import PropagationTrace, ScalarField, Stepper
from .errors import ConfigError
from .masks import Mask, screen
from .medium import MediumParams, WaveParams, d_epsilon
from .radial import RadialProfile, solve_profile
from .relax import relax_mode

log = logging.getLogger(__name__)


def _snap(x, dx):
    return round(x / dx) * dx


def diffraction_length(width: float, k: float) -> float:
    """``k w^2`` for a second-moment radius ``w``."""
    return k * width**2


# -- stability -----------------------------------------------------------------

@dataclass
class StabilityConfig:
    medium: MediumParams = field(default_factory=lambda: MediumParams(d_eps=0.2, i_sat=1.0))
    k0: float = 1.0
    e0: float = 2.0
    nx: int = 256
    ny: int = 128
    dx: float = 0.6
    n_diffraction: float = 20.0
    dz: float | None = None
    record_every: int = 10
    seed: int = 0
    absorber: bool = True
    core_factor: float = 2.5

    def wave(self) -> WaveParams:
        return WaveParams.from_k0(self.k0, self.medium)

    def step_size(self) -> float:
        return self.dz or self.wave().lambda_med / 10


@dataclass
class StabilityResult:
    kind: str
    level: float
    trace: PropagationTrace
    verdict: str
    centroid_drift: float
    width_drift: float
    core_fraction: float
    monotone: bool
    tracked_x: list = field(default_factory=list)


class _CoreTracker:
    """Follows the filament with a window around its running centroid."""

    def __init__(self, field0: ScalarField, half_width: float):
        self.half = half_width
        self.cx, self.cy = bpm.centroid(field0)
        self.p0 = bpm.power(field0)
        self.xs, self.ys, self.fractions, self.widths = [], [], [], []

    def __call__(self, f: ScalarField):
        X, Y = f.mesh()
        for _ in range(3):
            # fractional cell coverage keeps the window continuous in the center
            dist = np.hypot(X - self.cx, Y - self.cy)
            win = np.clip((self.half - dist) / f.dx + 0.5, 0.0, 1.0)
            cx, cy = bpm.centroid(f, win)
            if abs(cx - self.cx) < 1e-12 and abs(cy - self.cy) < 1e-12:
                break
            self.cx, self.cy = cx, cy
        self.xs.append(self.cx)
        self.ys.append(self.cy)
        inside = np.abs(f.amp) ** 2 * win
        self.fractions.append(float(inside.sum() * f.dx * f.dy / self.p0))
        self.widths.append(bpm.width(f, win))


def soliton_field(profile: RadialProfile, nx, ny, dx, center=(0.0, 0.0), phase=0.0):
    return bpm.embed_profile(profile, nx, ny, dx, center=center, phase=phase)


def run_stability(kind: str, level: float, cfg: StabilityConfig, profile: RadialProfile | None = None
                  ) -> StabilityResult:
    """Propagate a perturbed soliton and classify the response.

    Symmetric perturbations are ``stable`` when the tracked centroid moves
    less than ``dx`` and the core width changes by less than 5%.  A tilt is
    ``curved-intact`` when the centroid drifts monotonically and more than
    90% of the power stays in the core.
    """
    w = cfg.wave()
    prof = profile or solve_profile(cfg.e0, cfg.medium, w)
    k = w.k_lin(cfg.medium)
    base = soliton_field(prof, cfg.nx, cfg.ny, cfg.dx)
    w0 = bpm.width(base)
    z_end = cfg.n_diffraction * diffraction_length(w0, k)
    start = (0.0, 0.0)
    if kind == "asymmetric-tilt":
        start = (_snap(-0.5 * level * z_end, cfg.dx), 0.0)
        base = soliton_field(prof, cfg.nx, cfg.ny, cfg.dx, center=start)
    f0 = bpm.perturb(base, kind, level, seed=cfg.seed, k=k)
    tracker = _CoreTracker(f0, cfg.core_factor * w0)
    tracker.cx, tracker.cy = start
    trace = bpm.propagate(f0, z_end, cfg.step_size(), cfg.medium, w, observers=[tracker],
                          record_every=cfg.record_every, absorber=cfg.absorber)
    xs = np.asarray(tracker.xs)
    ys = np.asarray(tracker.ys)
    drift = float(np.max(np.hypot(xs - xs[0], ys - ys[0])))
    widths = np.asarray(tracker.widths)
    wdrift = float(np.max(np.abs(widths / widths[0] - 1)))
    frac = float(np.min(tracker.fractions))
    dxs = np.diff(xs)
    monotone = bool(np.all(dxs > 0) or np.all(dxs < 0))
    if kind == "asymmetric-tilt":
        ok = monotone and frac > 0.9 and drift > cfg.dx
        verdict = "curved-intact" if ok else "destroyed"
    else:
        verdict = "stable" if (drift < cfg.dx and wdrift < 0.05) else "unstable"
    return StabilityResult(kind, level, trace, verdict, drift, wdrift, frac, monotone, list(xs))


# -- filament pair -----------------------------------------------------------

@dataclass
class PairConfig:
    medium: MediumParams = field(default_factory=lambda: MediumParams(d_eps=0.2, i_sat=1.0))
    k0: float = 1.0
    e0: float = 2.0
    nx: int = 256
    ny: int = 128
    dx: float = 0.6
    n_diffraction: float = 20.0
    dz: float | None = None
    record_every: int = 10
    absorber: bool = True
    neutral_tol: float | None = None

    def wave(self) -> WaveParams:
        return WaveParams.from_k0(self.k0, self.medium)


@dataclass
class PairResult:
    separation: float
    relative_phase: float
    z: list
    separations: list
    center_of_mass: list
    verdict: str
    merged: bool
    trace: PropagationTrace | None = None


def _pair_separation(f: ScalarField):
    i = np.abs(f.amp) ** 2
    x = f.x
    cols = i.sum(axis=0)
    left = x < 0
    right = x > 0
    # the x = 0 column is shared equally
    mid = cols[x == 0].sum() / 2
    xl = (cols[left] * x[left]).sum() / (cols[left].sum() + mid)
    xr = (cols[right] * x[right]).sum() / (cols[right].sum() + mid)
    com = (cols * x).sum() / cols.sum()
    return float(xr - xl), float(com)


def _merged(f: ScalarField, row: int) -> bool:
    cut = np.abs(f.amp[row]) ** 2
    interior = (cut[1:-1] > cut[:-2]) & (cut[1:-1] >= cut[2:]) & (cut[1:-1] > 1e-3 * cut.max())
    return int(interior.sum()) < 2


def run_pair(separation: float, relative_phase: float, cfg: PairConfig, profile: RadialProfile | None = None
             ) -> PairResult:
    """Two solitons at ``x = -separation/2`` and ``+separation/2`` with a phase offset.

    The verdict follows the sign of the mean rate of change of the
    centroid separation of the two half-planes.
    """
    w = cfg.wave()
    prof = profile or solve_profile(cfg.e0, cfg.medium, w)
    k = w.k_lin(cfg.medium)
    single = soliton_field(prof, cfg.nx, cfg.ny, cfg.dx)
    core = bpm.width(single)
    if separation < 3 * core:
        raise ConfigError(f"separation {separation} is below 3 core radii ({3 * core:.4g})")
    half = _snap(separation / 2, cfg.dx)
    f0 = soliton_field(prof, cfg.nx, cfg.ny, cfg.dx, center=(-half, 0.0))
    f0.amp = f0.amp + soliton_field(prof, cfg.nx, cfg.ny, cfg.dx, center=(half, 0.0), phase=relative_phase).amp
    z_end = cfg.n_diffraction * diffraction_length(core, k)
    row = cfg.ny // 2

    zs, seps, coms = [], [], []
    merged = False

    st = Stepper(f0, cfg.dz or w.lambda_med / 10, cfg.medium, w, absorber=cfg.absorber)
    cur = f0
    n = 0
    while True:
        if n % cfg.record_every == 0 or cur.z >= z_end:
            s, c = _pair_separation(cur)
            zs.append(cur.z)
            seps.append(s)
            coms.append(c)
            if _merged(cur, row):
                merged = True
                break
        if cur.z >= z_end - 1e-9 * st.dz:
            break
        cur = st.advance(cur, min(st.dz, z_end - cur.z))
        n += 1
    tol = cfg.neutral_tol if cfg.neutral_tol is not None else 0.1 * cfg.dx
    change = seps[-1] - seps[0]
    if change < -tol:
        verdict = "attract"
    elif change > tol:
        verdict = "repel"
    else:
        verdict = "neutral"
    return PairResult(2 * half, relative_phase, zs, seps, coms, verdict, merged)


# -- Young two-hole experiment -----------------------------------------------------

@dataclass
class YoungConfig:
    medium: MediumParams = field(default_factory=lambda: MediumParams(d_eps=0.2, i_sat=1.0))
    k0: float = 1.0
    mode: str = "1d"
    kappa: float = 0.25        # decay rate of the 1D filament (1d mode)
    e0: float = 2.0            # peak amplitude of the radial filament (2d mode)
    nx: int = 2048
    ny: int = 1
    dx: float = 0.25
    filament_x: float = 0.0
    hole1_size: float = 10.0   # slit half-width or hole radius
    side_offsets: tuple = (15.0,)
    hole2_size: float = 4.0
    z_screen: float = 10.0
    n_aperture_lengths: float = 20.0
    dz: float | None = None
    edge: float | None = None
    track_half_width: float = 8.0
    significance: float = 5.0
    randomize_side_phase: bool = False
    n_realizations: int = 16   # seeded copies averaged when the side phase is randomized
    seed: int = 0
    record_every: int = 4

    def wave(self) -> WaveParams:
        return WaveParams.from_k0(self.k0, self.medium)

    def mirrored(self) -> "YoungConfig":
        return replace(self, filament_x=-self.filament_x, side_offsets=tuple(-o for o in self.side_offsets))


@dataclass
class DeflectionReport:
    z: list
    control_x: list
    test_x: list
    control_deflection: float
    deflection: float
    fringe_gradient: float
    verdict: str
    significant: bool
    sign_match: bool
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "control_deflection": self.control_deflection,
            "deflection": self.deflection,
            "fringe_gradient": self.fringe_gradient,
            "verdict": self.verdict,
            "significant": self.significant,
            "sign_match": self.sign_match,
        }


def _filament_1d(cfg: YoungConfig, w: WaveParams, template: ScalarField):
    """Symmetric (1+1)D filament sampled on the experiment grid, centered at 0."""
    mode = relax_mode(cfg.kappa, cfg.medium, w, cfg.nx, cfg.nx * cfg.dx, dims=1)
    u = mode.u[0]
    # enforce exact mirror symmetry about x = 0 on the periodic grid
    u = 0.5 * (u + np.roll(u[::-1], 1))
    return u.reshape(template.amp.shape).astype(np.complex128)


def _young_initial(cfg: YoungConfig, w: WaveParams):
    tmpl = ScalarField.zeros(cfg.nx, cfg.ny, cfg.dx)
    shift = int(round(cfg.filament_x / cfg.dx))
    if abs(shift * cfg.dx - cfg.filament_x) > 1e-9 * cfg.dx:
        raise ConfigError("filament_x must be a multiple of dx")
    if cfg.mode == "1d":
        if cfg.ny != 1:
            raise ConfigError("1d mode needs ny = 1")
        amp = _filament_1d(cfg, w, tmpl)
        amp = np.roll(amp, shift, axis=1)
        f = ScalarField(cfg.nx, cfg.ny, cfg.dx, cfg.dx, 0.0, amp)
        core = bpm.width(ScalarField(cfg.nx, 1, cfg.dx, cfg.dx, 0.0, _filament_1d(cfg, w, tmpl)))
    elif cfg.mode == "2d":
        if cfg.ny < 2:
            raise ConfigError("2d mode needs ny > 1")
        prof = solve_profile(cfg.e0, cfg.medium, w)
        f = bpm.embed_profile(prof, cfg.nx, cfg.ny, cfg.dx, center=(cfg.filament_x, 0.0))
        core = bpm.width(bpm.embed_profile(prof, cfg.nx, cfg.ny, cfg.dx))
    else:
        raise ConfigError(f"unknown young mode {cfg.mode!r}")
    return f, core


def _young_masks(cfg: YoungConfig, f: ScalarField, core: float):
    edge = cfg.edge if cfg.edge is not None else 2 * cfg.dx
    hole1 = ((cfg.filament_x, 0.0), cfg.hole1_size)
    if cfg.hole1_size < core:
        raise ConfigError(f"hole 1 (size {cfg.hole1_size}) does not cover the filament core ({core:.4g})")
    control = screen(f, [hole1], edge)
    if cfg.hole2_size == 0:
        # second hole closed: the test screen is the control screen
        return control, control, np.zeros(f.amp.shape)
    sides = [((cfg.filament_x + off, 0.0), cfg.hole2_size) for off in cfg.side_offsets]
    for (c, s) in sides:
        if abs(c[0] - cfg.filament_x) - s < cfg.hole1_size:
            raise ConfigError(f"side hole at {c[0]} overlaps hole 1")
    test = screen(f, [hole1] + sides, edge)
    side_only = np.clip(test.transmission.real - control.transmission.real, 0.0, 1.0)
    return control, test, side_only


def _randomized_masks(cfg: YoungConfig, control: Mask, test: Mask, side_only: np.ndarray):
    """Seeded copies of the test screen with a random phase on every side-hole sample."""
    rng = np.random.default_rng(cfg.seed)
    out = []
    for _ in range(cfg.n_realizations):
        phase = np.exp(2j * np.pi * rng.random(side_only.shape))
        out.append(Mask(test.kind, control.transmission + side_only * phase, test.holes))
    return out


def _run_tracked(f0, mask, cfg, w, z_end, start_x):
    tracker = _CoreTracker(f0, cfg.track_half_width)
    tracker.cx, tracker.cy = start_x, 0.0
    trace = bpm.propagate(f0, z_end, cfg.dz or w.lambda_med / 10, cfg.medium, w,
                          masks=[(cfg.z_screen, mask)], observers=[tracker],
                          record_every=cfg.record_every, absorber=True)
    return trace, tracker


def fringe_gradient(arriving: ScalarField, side_t: np.ndarray, filament: np.ndarray, kappa_sq_over_2k: float,
                    cfg: YoungConfig, w: WaveParams, length: float, nz: int = 128) -> float:
    """Predicted displacement direction from the linear fringe pattern.

    The field passing the side holes is diffracted by direct Fresnel
    quadrature (no FFT) and beaten against the stationary filament.  The
    resulting index fringe ``chi * 2 Re(conj(phi) psi)`` pushes the filament
    with the force ``-int d|phi|^2/dx * chi * fringe``; the force is
    accumulated with the lever arm ``(length - zeta)``.  Its sign points to
    the brighter side.
    """
    k = w.k_lin(cfg.medium)
    src = arriving.amp * side_t
    s = np.abs(filament) ** 2
    ds = np.gradient(s, arriving.dx, axis=1)
    chi = _chi(s, cfg.medium)
    X, Y = arriving.mesh()
    sel_src = np.abs(src) > 1e-12 * max(np.abs(src).max(), 1e-300)
    sel_obs = s > 1e-10 * s.max()
    xs, ys, a_src = X[sel_src], Y[sel_src], src[sel_src]
    xo, yo = X[sel_obs], Y[sel_obs]
    fil_o = filament[sel_obs]
    push = ds[sel_obs] * chi[sel_obs]
    cell = arriving.dx * (arriving.dy if arriving.ny > 1 else 1.0)
    dims = 1 if arriving.ny == 1 else 2
    zetas = np.linspace(length / nz, length, nz)
    force = np.empty(nz)
    for j, zeta in enumerate(zetas):
        pref = (k / (2j * np.pi * zeta)) ** (dims / 2)
        psi = np.zeros(xo.shape, dtype=complex)
        for start in range(0, xo.size, 256):
            sl = slice(start, start + 256)
            r2 = (xo[sl, None] - xs[None, :]) ** 2 + (yo[sl, None] - ys[None, :]) ** 2
            psi[sl] = (pref * np.exp(1j * k * r2 / (2 * zeta)) * cell) @ a_src
        # the stationary filament only picks up its propagation phase
        fringe = 2 * np.real(np.conj(fil_o * np.exp(1j * kappa_sq_over_2k * zeta)) * psi)
        force[j] = -np.sum(push * fringe)
    return float(np.trapezoid(force * (length - zetas), zetas))


def _chi(i, p: MediumParams):
    """Nonlinear susceptibility ``d eps / d I``."""
    if math.isinf(p.i_sat):
        return p.d_eps * np.ones_like(i)
    return p.d_eps / (1 + i / p.i_sat) ** 2


def run_young(cfg: YoungConfig) -> DeflectionReport:
    """Single-hole control versus two-hole test behind the same screen."""
    w = cfg.wave()
    k = w.k_lin(cfg.medium)
    f, core = _young_initial(cfg, w)
    control_mask, test_mask, side_t = _young_masks(cfg, f, core)
    # a closed second hole keeps the run length set by hole 1
    aperture_ld = k * (cfg.hole2_size or cfg.hole1_size) ** 2
    z_end = cfg.z_screen + cfg.n_aperture_lengths * aperture_ld
    ctrace, ctrack = _run_tracked(f, control_mask, cfg, w, z_end, cfg.filament_x)
    if cfg.randomize_side_phase:
        if cfg.n_realizations < 1:
            raise ConfigError("n_realizations must be >= 1")
        # an incoherent side field: the ensemble mean adds intensities, not amplitudes
        runs = [_run_tracked(f, m, cfg, w, z_end, cfg.filament_x)
                for m in _randomized_masks(cfg, control_mask, test_mask, side_t)]
        ttrace = runs[0][0]
        test_x = np.mean([tk.xs for _, tk in runs], axis=0)
    else:
        ttrace, ttrack = _run_tracked(f, test_mask, cfg, w, z_end, cfg.filament_x)
        test_x = np.asarray(ttrack.xs)
    c_defl = float(ctrack.xs[-1] - cfg.filament_x)
    t_defl = float(test_x[-1] - cfg.filament_x)

    if cfg.mode == "1d":
        kappa2 = cfg.kappa**2
    else:
        kappa2 = solve_profile(cfg.e0, cfg.medium, w).kappa ** 2
    # field arriving at the screen: the filament is stationary up to its phase
    arriving = f.copy(amp=f.amp * np.exp(1j * kappa2 / (2 * k) * cfg.z_screen))
    if np.any(side_t):
        grad = fringe_gradient(arriving, side_t, arriving.amp, kappa2 / (2 * k), cfg, w, z_end - cfg.z_screen)
    else:
        grad = 0.0

    significant = abs(t_defl) >= cfg.significance * abs(c_defl) and abs(t_defl) > 0
    sign_match = bool(np.sign(t_defl) == np.sign(grad) and grad != 0)
    verdict = ("consistent" if sign_match else "inconsistent") if significant else "null-effect"
    return DeflectionReport(
        z=list(ttrace.z), control_x=list(ctrack.xs), test_x=[float(v) for v in test_x],
        control_deflection=c_defl, deflection=t_defl, fringe_gradient=grad,
        verdict=verdict, significant=bool(significant), sign_match=sign_match,
    )

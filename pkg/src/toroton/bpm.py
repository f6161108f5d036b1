"""Split-step spectral propagation of a scalar paraxial envelope.

The envelope ``A(x, y, z)`` of ``E = Re[A exp(i(k z - w t))]`` with
``k = k0 sqrt(eps_lin)`` obeys

    dA/dz = (i / 2k) lap_perp A + i (k0^2 / 2k) deps(|A|^2) A,

so a radial mode with decay rate ``kappa`` is stationary up to the phase
``exp(i kappa^2 z / 2k)``.  Steps are symmetric (Strang) splits: half a
linear step in Fourier space, a full nonlinear phase, half a linear step.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError
from .medium import MediumParams, WaveParams, d_epsilon

log = logging.getLogger(__name__)


class BlowupError(RuntimeError):
    """The field became non-finite or its peak exploded: collapse is under-resolved."""

    def __init__(self, z: float, msg: str = "propagation blew up"):
        super().__init__(f"{msg} at z={z:.6g}")
        self.z = z


class MomentError(ValueError):
    pass


def fft_workers() -> int:
    try:
        return max(1, int(os.environ.get("TOROTON_THREADS", "1")))
    except ValueError:
        return 1


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass
class ScalarField:
    nx: int
    ny: int
    dx: float
    dy: float
    z: float
    amp: np.ndarray  # shape (ny, nx), complex128

    def __post_init__(self):
        if not (_is_pow2(self.nx) and _is_pow2(self.ny)):
            raise ValueError(f"grid dimensions must be powers of two, got {self.nx}x{self.ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("grid steps must be positive")
        self.amp = np.asarray(self.amp, dtype=np.complex128).reshape(self.ny, self.nx)

    @classmethod
    def zeros(cls, nx, ny, dx, dy=None, z=0.0):
        dy = dx if dy is None else dy
        return cls(nx, ny, dx, dy, z, np.zeros((ny, nx), dtype=np.complex128))

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx // 2) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * self.dy

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="xy")

    def copy(self, **changes) -> "ScalarField":
        out = replace(self, **changes)
        if "amp" not in changes:
            out.amp = self.amp.copy()
        return out

    def boundary_ratio(self) -> float:
        """Largest edge amplitude relative to the peak (0 for an empty field)."""
        a = np.abs(self.amp)
        peak = a.max()
        if peak == 0:
            return 0.0
        edges = [a[:, 0], a[:, -1]]
        if self.ny > 1:
            edges += [a[0, :], a[-1, :]]
        return float(max(e.max() for e in edges) / peak)

    def contaminated(self, threshold: float = 1e-3) -> bool:
        return self.boundary_ratio() >= threshold


# -- diagnostics -------------------------------------------------------------

def power(field: ScalarField) -> float:
    return float(np.sum(np.abs(field.amp) ** 2) * field.dx * field.dy)


def _moments(field: ScalarField, weight=None):
    i = np.abs(field.amp) ** 2
    if weight is not None:
        i = i * weight
    tot = i.sum()
    if not tot > 0:
        raise MomentError("moments of a zero-power field are undefined")
    return i, tot


def centroid(field: ScalarField, weight=None) -> tuple[float, float]:
    i, tot = _moments(field, weight)
    cx = float((i.sum(axis=0) * field.x).sum() / tot)
    cy = float((i.sum(axis=1) * field.y).sum() / tot)
    return cx, cy


def width(field: ScalarField, weight=None) -> float:
    """Second-moment radius ``sqrt(<|r - r_c|^2>)``."""
    i, tot = _moments(field, weight)
    cx, cy = centroid(field, weight)
    X, Y = field.mesh()
    return float(np.sqrt((i * ((X - cx) ** 2 + (Y - cy) ** 2)).sum() / tot))


def peak(field: ScalarField) -> float:
    return float(np.abs(field.amp).max())


# -- stepping ----------------------------------------------------------------

class Stepper:
    """Caches the spectral kernels of one grid, step size and medium."""

    def __init__(self, template: ScalarField, dz: float, p: MediumParams, w: WaveParams,
                 absorber: bool = False, blowup_factor: float = 1e3, alias_limit: float = 1e-2):
        if not dz > 0:
            raise ValueError("dz must be > 0")
        if dz > w.lambda_med / 10 * (1 + 1e-12):
            raise ValueError(f"dz={dz} exceeds lambda_med/10={w.lambda_med / 10}")
        self.nx, self.ny, self.dx, self.dy = template.nx, template.ny, template.dx, template.dy
        self.dz, self.p, self.w = dz, p, w
        self.k = w.k_lin(p)
        kx = 2 * np.pi * sfft.fftfreq(self.nx, d=self.dx)
        ky = 2 * np.pi * sfft.fftfreq(self.ny, d=self.dy)
        self.kperp2 = kx[None, :] ** 2 + ky[:, None] ** 2
        # outer third of the spectral grid: power piling up there means the
        # field is collapsing below the grid scale
        band = np.abs(kx)[None, :] > (2 / 3) * np.abs(kx).max()
        if self.ny > 1:
            band = band | (np.abs(ky)[:, None] > (2 / 3) * np.abs(ky).max())
        self.band = np.broadcast_to(band, (self.ny, self.nx))
        self.alias_limit = alias_limit
        self._checked_peak = 0.0
        self.nl_coeff = w.k0**2 / (2 * self.k)
        self.linear_only = p.d_eps == 0
        self._kernels = {}
        self.absorb = self._absorber_profile(dz) if absorber else None
        self.blowup_factor = blowup_factor
        self.workers = fft_workers()

    def _kernel(self, h):
        ker = self._kernels.get(h)
        if ker is None:
            ker = np.exp(-1j * self.kperp2 * h / (2 * self.k))
            self._kernels[h] = ker
        return ker

    def _absorber_profile(self, h):
        # sin^2 ramp over a rim of 8 cells on every extended axis, a function of
        # |x| so that it is invariant under the grid reflection j -> n - j
        rim = 8
        fac = np.ones((self.ny, self.nx))
        for axis, n, d in ((1, self.nx, self.dx), (0, self.ny, self.dy)):
            if n < 4 * rim:
                continue
            x = np.abs((np.arange(n) - n // 2) * d)
            t = np.clip((n // 2 * d - x) / (rim * d), 0.0, 1.0)
            ramp = np.sin(0.5 * np.pi * t) ** 2
            fac *= ramp[None, :] if axis == 1 else ramp[:, None]
        # per-step damping; strength scales with the step so a rim crossing is absorbing
        return np.exp(-(1 - fac) * 0.5 * h)

    def linear(self, amp, h):
        a = sfft.fftn(amp, workers=self.workers)
        a *= self._kernel(h)
        return sfft.ifftn(a, workers=self.workers)

    def band_fraction(self, amp) -> float:
        """Share of spectral power in the outer third of the grid."""
        s = np.abs(sfft.fftn(amp, workers=self.workers)) ** 2
        tot = s.sum()
        return float(s[self.band].sum() / tot) if tot > 0 else 0.0

    def nonlinear(self, amp, h):
        if self.linear_only:
            return amp
        phase = self.nl_coeff * d_epsilon(np.abs(amp) ** 2, self.p) * h
        return amp * np.exp(1j * phase)

    def advance(self, field: ScalarField, h: float | None = None) -> ScalarField:
        h = self.dz if h is None else h
        amp = field.amp
        start_peak = np.abs(amp).max()
        if self.linear_only:
            amp = self.linear(amp, h)
        else:
            amp = self.linear(amp, h / 2)
            amp = self.nonlinear(amp, h)
            amp = self.linear(amp, h / 2)
        if self.absorb is not None:
            amp = amp * (self.absorb if h == self.dz else self.absorb ** (h / self.dz))
        z = field.z + h
        if not np.all(np.isfinite(amp)):
            raise BlowupError(z, "non-finite amplitude")
        end_peak = np.abs(amp).max()
        if start_peak > 0 and end_peak > self.blowup_factor * start_peak:
            raise BlowupError(z, "peak amplitude exploded")
        # only a growing peak can signal collapse; checked sparingly because it costs a transform
        if not self.linear_only and end_peak > start_peak and end_peak > self._checked_peak * 1.05:
            self._checked_peak = end_peak
            frac = self.band_fraction(amp)
            if frac > self.alias_limit:
                raise BlowupError(z, f"collapse below grid scale ({frac:.3g} of power near the Nyquist band)")
        return ScalarField(field.nx, field.ny, field.dx, field.dy, z, amp)


def step(field: ScalarField, dz: float, p: MediumParams, w: WaveParams) -> ScalarField:
    """Advance one symmetric split step (kernels rebuilt per call)."""
    return Stepper(field, dz, p, w).advance(field)


# -- propagation -------------------------------------------------------------

@dataclass
class PropagationTrace:
    z: list = field(default_factory=list)
    power: list = field(default_factory=list)
    peak: list = field(default_factory=list)
    cx: list = field(default_factory=list)
    cy: list = field(default_factory=list)
    width: list = field(default_factory=list)
    contaminated: bool = False
    final: ScalarField | None = field(default=None, repr=False)

    COLUMNS = ("z", "power", "peak", "cx", "cy", "width")

    def record(self, f: ScalarField):
        self.z.append(f.z)
        self.power.append(power(f))
        self.peak.append(peak(f))
        if self.power[-1] > 0:
            cx, cy = centroid(f)
            wd = width(f)
        else:
            cx = cy = wd = float("nan")
        self.cx.append(cx)
        self.cy.append(cy)
        self.width.append(wd)
        if f.contaminated():
            self.contaminated = True

    def column(self, name) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def rows(self):
        return zip(*(getattr(self, c) for c in self.COLUMNS))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(self.COLUMNS)
            for row in self.rows():
                wr.writerow([format(float(v), ".17g") for v in row])


Observer = Callable[[ScalarField], None]


def propagate(field: ScalarField, z_end: float, dz: float, p: MediumParams, w: WaveParams,
              masks: Iterable = (), observers: Iterable[Observer] = (), record_every: int = 1,
              absorber: bool = False, stepper: Stepper | None = None) -> PropagationTrace:
    """Propagate to ``z_end`` applying each ``(z_position, mask)`` once at its plane.

    A step that would overshoot a mask plane is shortened to land on it.
    The trace holds the initial state and then every ``record_every``-th
    step; the returned trace carries the final field in ``final``.
    """
    masks = list(masks)
    zs = [zm for zm, _ in masks]
    problems = []
    if any(b < a for a, b in zip(zs, zs[1:])):
        problems.append("masks must be sorted by z_position")
    for zm in zs:
        if not (field.z <= zm <= z_end):
            problems.append(f"mask at z={zm} outside [{field.z}, {z_end}]")
    if problems:
        raise ConfigError(problems)
    observers = list(observers)
    st = stepper or Stepper(field, dz, p, w, absorber=absorber)
    trace = PropagationTrace()

    cur = field
    pending = list(masks)
    while pending and pending[0][0] == cur.z:
        cur = pending.pop(0)[1].apply(cur)
    trace.record(cur)
    for ob in observers:
        ob(cur)
    n = 0
    # tolerance keeps floating drift from adding a sliver step at the end
    z_tol = 1e-9 * dz
    while cur.z < z_end - z_tol:
        target = min(cur.z + dz, z_end)
        if pending and pending[0][0] < target - z_tol:
            target = pending[0][0]
        h = target - cur.z
        cur = st.advance(cur, dz if abs(h - dz) <= z_tol else h)
        if abs(cur.z - target) <= z_tol:
            cur.z = target
        while pending and abs(pending[0][0] - cur.z) <= z_tol:
            cur = pending.pop(0)[1].apply(cur)
        n += 1
        if n % record_every == 0 or cur.z >= z_end - z_tol:
            trace.record(cur)
            for ob in observers:
                ob(cur)
    trace.final = cur
    return trace


# -- initial fields and perturbations ------------------------------------------

def gaussian(nx, ny, dx, w0, amplitude=1.0, center=(0.0, 0.0), dy=None, z=0.0) -> ScalarField:
    """Field ``amplitude * exp(-|r - center|^2 / w0^2)``."""
    f = ScalarField.zeros(nx, ny, dx, dy)
    X, Y = f.mesh()
    f.amp = amplitude * np.exp(-((X - center[0]) ** 2 + (Y - center[1]) ** 2) / w0**2) + 0j
    f.z = z
    return f


def embed_profile(profile, nx, ny, dx, dy=None, center=(0.0, 0.0), phase=0.0) -> ScalarField:
    """Sample a radial mode onto a transverse grid."""
    f = ScalarField.zeros(nx, ny, dx, dy)
    X, Y = f.mesh()
    r = np.hypot(X - center[0], Y - center[1])
    f.amp = profile(r) * np.exp(1j * phase)
    return f


def perturb(field: ScalarField, kind: str, level: float, seed: int = 0, k: float | None = None,
            ring_radius: float | None = None) -> ScalarField:
    """Apply a symmetric ring, a transverse phase tilt, or seeded complex noise.

    For ``asymmetric-tilt`` the level is the tilt angle in radians and ``k``
    the background wavenumber.
    """
    if level == 0:
        return field.copy()
    X, Y = field.mesh()
    cx, cy = centroid(field)
    if kind == "symmetric-ring":
        r = np.hypot(X - cx, Y - cy)
        r0 = ring_radius if ring_radius is not None else width(field)
        fac = 1.0 + level * np.exp(-(((r - r0) / (0.5 * r0)) ** 2))
    elif kind == "asymmetric-tilt":
        if k is None:
            raise ValueError("asymmetric-tilt needs the background wavenumber k")
        fac = np.exp(1j * k * level * (X - cx))
    elif kind == "noise":
        rng = np.random.default_rng(seed)
        shape = field.amp.shape
        noise = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
        fac = 1.0 + level * noise
    else:
        raise ValueError(f"unknown perturbation kind {kind!r}")
    return field.copy(amp=field.amp * fac)

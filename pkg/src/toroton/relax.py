"""Spectral relaxation solver for stationary self-trapped modes on a grid.

Solves ``-lap u + kappa^2 u = k0^2 deps(u^2) u`` at fixed decay rate
``kappa`` with the Petviashvili stabilized fixed-point iteration.  It shares
nothing with the shooting solver and serves as its independent check; in
one transverse dimension it also generates (1+1)D filament fixtures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .medium import MediumParams, WaveParams, d_epsilon


class RelaxationError(RuntimeError):
    pass


@dataclass
class RelaxedMode:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    kappa: float
    iterations: int
    residual: float

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    @property
    def dy(self):
        return float(self.y[1] - self.y[0]) if self.y.size > 1 else 1.0

    @property
    def peak(self) -> float:
        return float(self.u.max())

    def norm(self) -> float:
        """``int u^2 dA`` (``int u^2 dx`` on a single-row grid)."""
        return float(np.sum(self.u**2) * self.dx * self.dy)


def relax_mode(kappa, p: MediumParams, w: WaveParams, n: int, length: float, dims: int = 2,
               exponent: float = 1.5, tol: float = 1e-12, max_iter: int = 5000, seed_width=None) -> RelaxedMode:
    """Relax to the nodeless mode with decay rate ``kappa``.

    The grid has ``n`` points per transverse axis over ``[-length/2, length/2)``;
    ``dims=1`` gives a single-row (1+1)D grid.
    """
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    if not p.pure_kerr and kappa**2 >= w.k0**2 * p.d_eps * p.i_sat:
        # the saturated index step cannot trap a mode that decays this fast
        raise RelaxationError(f"kappa^2 = {kappa**2:.6g} exceeds the saturated index step "
                              f"k0^2 d_eps i_sat = {w.k0**2 * p.d_eps * p.i_sat:.6g}")
    h = length / n
    x = (np.arange(n) - n // 2) * h
    kx = 2 * np.pi * np.fft.fftfreq(n, d=h)
    if dims == 2:
        y = x.copy()
        X, Y = np.meshgrid(x, y, indexing="xy")
        r2 = X**2 + Y**2
        K2 = kx[None, :] ** 2 + kx[:, None] ** 2
    elif dims == 1:
        y = np.zeros(1)
        r2 = (x**2)[None, :]
        K2 = (kx**2)[None, :]
    else:
        raise ValueError("dims must be 1 or 2")
    lin = K2 + kappa**2
    k02 = w.k0**2

    sw = seed_width or 1.0 / kappa
    u = np.exp(-r2 / (2 * sw**2)) * kappa / (w.k0 * np.sqrt(max(p.d_eps, 1e-300)))
    resid = np.inf
    for it in range(1, max_iter + 1):
        nl = k02 * d_epsilon(u * u, p) * u
        nl_hat = np.fft.fftn(nl)
        u_hat = np.fft.fftn(u)
        num = np.sum(lin * np.abs(u_hat) ** 2)
        den = np.real(np.sum(np.conj(u_hat) * nl_hat))
        if not den > 0:
            raise RelaxationError("iteration lost the focusing branch")
        m = num / den
        u_new = np.real(np.fft.ifftn(m**exponent * nl_hat / lin))
        resid = float(np.max(np.abs(u_new - u)) / np.max(np.abs(u_new)))
        u = u_new
        if not np.isfinite(resid):
            raise RelaxationError("non-finite iterate")
        if resid < tol:
            break
    else:
        raise RelaxationError(f"no convergence after {max_iter} iterations (residual {resid:.3g})")
    return RelaxedMode(x=x, y=y, u=u, kappa=kappa, iterations=it, residual=resid)

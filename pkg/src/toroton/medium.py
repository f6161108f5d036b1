"""Saturable nonlinear material response.

Permittivity grows with the local field intensity and the relative
permeability grows with the cycle-averaged squared curl amplitude; both
follow the rational saturable form ``x / (1 + x / x_sat)``.  Lengths are in
units of ``1/k0`` and ``c = 1`` unless a config says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Raised when a response function gets an argument outside its domain."""


@dataclass(frozen=True)
class MediumParams:
    """Coefficients of the electric and magnetic saturable responses.

    ``i_sat = inf`` selects the pure-Kerr limit.
    """

    eps_lin: float = 1.0
    d_eps: float = 0.05
    i_sat: float = 1.0
    mu1: float = 0.0
    u_sat: float = 1.0
    mu_exp: float = 1.0

    def __post_init__(self):
        errors = self.violations()
        if errors:
            raise ValueError("; ".join(errors))

    def violations(self) -> list[str]:
        out = []
        if not self.eps_lin >= 1.0:
            out.append(f"eps_lin >= 1 violated (eps_lin={self.eps_lin})")
        if not self.d_eps >= 0.0:
            out.append(f"d_eps >= 0 violated (d_eps={self.d_eps})")
        if not self.i_sat > 0.0:
            out.append(f"i_sat > 0 violated (i_sat={self.i_sat})")
        if not self.mu1 >= 0.0:
            out.append(f"mu1 >= 0 violated (mu1={self.mu1})")
        if not self.u_sat > 0.0:
            out.append(f"u_sat > 0 violated (u_sat={self.u_sat})")
        if not self.mu_exp >= 1.0:
            out.append(f"mu_exp >= 1 violated (mu_exp={self.mu_exp})")
        elif self.mu_exp != 1.0 and math.isinf(self.u_sat):
            out.append("mu_exp != 1 needs a finite u_sat")
        return out

    @property
    def eps_max(self) -> float:
        return self.eps_lin + self.d_eps * self.i_sat

    @property
    def pure_kerr(self) -> bool:
        return math.isinf(self.i_sat)


@dataclass(frozen=True)
class WaveParams:
    """Free-space wavenumber and the derived frequency and in-medium wavelength."""

    k0: float
    omega: float
    lambda_med: float

    @classmethod
    def from_k0(cls, k0: float, p: MediumParams) -> "WaveParams":
        if not k0 > 0:
            raise ValueError(f"k0 > 0 violated (k0={k0})")
        return cls(k0=k0, omega=k0, lambda_med=2 * math.pi / (k0 * math.sqrt(p.eps_lin)))

    def k_lin(self, p: MediumParams) -> float:
        """Linear background propagation constant ``k0 * sqrt(eps_lin)``."""
        return self.k0 * math.sqrt(p.eps_lin)

    def consistent_with(self, p: MediumParams, rtol: float = 1e-12) -> bool:
        lam = 2 * math.pi / (self.k0 * math.sqrt(p.eps_lin))
        return math.isclose(self.omega, self.k0, rel_tol=rtol) and math.isclose(
            self.lambda_med, lam, rel_tol=rtol
        )


def _saturable(x, coeff, x_sat):
    if math.isinf(x_sat):
        return coeff * x
    return coeff * x / (1.0 + x / x_sat)


def _check_nonneg(x, name):
    arr = np.asarray(x)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be >= 0")


def epsilon_of_intensity(i, p: MediumParams):
    """Relative permittivity ``eps_lin + d_eps*i/(1 + i/i_sat)``.

    Works elementwise on arrays.
    """
    _check_nonneg(i, "intensity")
    return p.eps_lin + _saturable(i, p.d_eps, p.i_sat)


def d_epsilon(i, p: MediumParams):
    """Nonlinear permittivity increment ``epsilon_of_intensity(i) - eps_lin``."""
    _check_nonneg(i, "intensity")
    return _saturable(i, p.d_eps, p.i_sat)


def delta_mu(u, p: MediumParams):
    """Permeability increment for cycle-averaged curl-squared ``u``.

    ``mu_exp = 1`` is ``mu1*u/(1 + u/u_sat)``; larger exponents give the
    sigmoidal ``mu1*u_sat*x/(1 + x)`` with ``x = (u/u_sat)**mu_exp``, which
    keeps the midpoint and the asymptote.
    """
    _check_nonneg(u, "curl-squared")
    if p.mu_exp == 1.0:
        return _saturable(u, p.mu1, p.u_sat)
    x = (np.asarray(u) / p.u_sat) ** p.mu_exp
    return p.mu1 * p.u_sat * x / (1.0 + x)


def d_delta_mu(u, p: MediumParams):
    """Derivative of :func:`delta_mu` with respect to ``u``."""
    _check_nonneg(u, "curl-squared")
    u = np.asarray(u, dtype=float)
    if math.isinf(p.u_sat):
        return p.mu1 * np.ones_like(u)
    if p.mu_exp == 1.0:
        return p.mu1 / (1.0 + u / p.u_sat) ** 2
    x = (u / p.u_sat) ** p.mu_exp
    with np.errstate(divide="ignore", invalid="ignore"):
        dx = np.where(u > 0, p.mu_exp * x / np.where(u > 0, u, 1.0), 0.0)
    return p.mu1 * p.u_sat * dx / (1.0 + x) ** 2


def index(i, u, p: MediumParams):
    """Refractive index ``sqrt(eps(i) * (1 + delta_mu(u)))``."""
    return np.sqrt(epsilon_of_intensity(i, p) * (1.0 + delta_mu(u, p)))

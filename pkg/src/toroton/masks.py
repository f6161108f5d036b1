"""Screens with holes (slits on single-row grids) applied at a propagation plane."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bpm import ScalarField
from .errors import ConfigError


@dataclass
class Mask:
    kind: str
    transmission: np.ndarray
    holes: list = field(default_factory=list)

    def __post_init__(self):
        self.transmission = np.asarray(self.transmission, dtype=np.complex128)
        if np.any(np.abs(self.transmission) > 1 + 1e-12):
            raise ConfigError("mask transmission magnitude exceeds 1")

    def apply(self, f: ScalarField) -> ScalarField:
        if self.transmission.shape != f.amp.shape:
            raise ConfigError(f"mask shape {self.transmission.shape} does not match field {f.amp.shape}")
        return ScalarField(f.nx, f.ny, f.dx, f.dy, f.z, f.amp * self.transmission)

    @classmethod
    def transparent(cls, template: ScalarField) -> "Mask":
        return cls("custom", np.ones_like(template.amp))

    @classmethod
    def opaque(cls, template: ScalarField) -> "Mask":
        return cls("custom", np.zeros_like(template.amp))

    def mirrored(self) -> "Mask":
        """Reflection ``x -> -x`` on the periodic grid (exact index permutation)."""
        t = np.roll(self.transmission[:, ::-1], 1, axis=1)
        holes = [dict(h, center=(-h["center"][0], h["center"][1])) for h in self.holes]
        return Mask(self.kind, t, holes)


def _soft_window(d, edge):
    """1 inside (``d < 0``), 0 outside, with a tanh edge of width ``edge``."""
    if edge <= 0:
        return (d <= 0).astype(float)
    return 0.5 * (1.0 - np.tanh(d / edge))


def hole_transmission(template: ScalarField, center, size, edge) -> np.ndarray:
    """Transmission of one aperture.

    On a single-row grid ``size`` is the slit half-width; otherwise the hole
    radius.
    """
    X, Y = template.mesh()
    if template.ny == 1:
        d = np.abs(X - center[0]) - size
    else:
        d = np.hypot(X - center[0], Y - center[1]) - size
    return _soft_window(d, edge)


def screen(template: ScalarField, holes, edge=None, guard=None) -> Mask:
    """Opaque screen pierced by ``holes``, a list of ``(center, size)`` pairs.

    ``guard`` is the band at the grid edge that holes must stay out of
    (default 8 cells, the absorbing rim).
    """
    edge = 2 * template.dx if edge is None else edge
    guard = 8 * max(template.dx, template.dy if template.ny > 1 else 0) if guard is None else guard
    half_x = template.nx * template.dx / 2
    half_y = template.ny * template.dy / 2
    problems = []
    t = np.zeros(template.amp.shape)
    spec = []
    for center, size in holes:
        center = (float(center[0]), float(center[1]) if len(center) > 1 else 0.0)
        if size <= 0:
            problems.append(f"hole at {center} has non-positive size {size}")
            continue
        reach = size + 3 * edge
        if abs(center[0]) + reach > half_x - guard or (
            template.ny > 1 and abs(center[1]) + reach > half_y - guard
        ):
            problems.append(f"hole at {center} with size {size} reaches the guard band")
        t = np.maximum(t, hole_transmission(template, center, size, edge))
        spec.append({"center": center, "size": float(size)})
    if problems:
        raise ConfigError(problems)
    kind = {0: "custom", 1: "single-hole", 2: "double-hole"}.get(len(spec), "custom")
    return Mask(kind, t.astype(np.complex128), spec)

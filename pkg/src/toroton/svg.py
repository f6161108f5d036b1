"""Small deterministic SVG plots: line series and intensity heatmaps.

Output depends only on the input data, so identical calls give
byte-identical files.
"""

from __future__ import annotations

import numpy as np

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")
# piecewise-linear ramp from dark blue through teal to yellow
_RAMP = np.array([[0x0d, 0x08, 0x87], [0x2a, 0x78, 0x8e], [0x22, 0xa8, 0x84], [0xf0, 0xf9, 0x21]], float)


class RenderError(ValueError):
    pass


def _num(v: float) -> str:
    return format(float(v), ".6g")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-family="sans-serif" font-size="14">{_esc(title)}</text>',
    ]


def _finite(arr, what):
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise RenderError(f"{what} contains non-finite values")
    return arr


def _ticks(lo, hi, n=5):
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render_series(series, path, title="", xlabel="", ylabel=""):
    """Line plot of ``{label: (x, y)}``; an empty mapping gives bare axes."""
    data = []
    for label, (x, y) in series.items():
        x, y = _finite(x, f"series {label!r} x"), _finite(y, f"series {label!r} y")
        if x.shape != y.shape:
            raise RenderError(f"series {label!r}: x and y lengths differ")
        data.append((label, x, y))
    xs = np.concatenate([d[1] for d in data]) if data else np.array([])
    ys = np.concatenate([d[2] for d in data]) if data else np.array([])
    x0, x1 = (xs.min(), xs.max()) if xs.size else (0.0, 1.0)
    y0, y1 = (ys.min(), ys.max()) if ys.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    out = _header(title)
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _ticks(x0, x1):
        out.append(f'<text x="{_num(px(t))}" y="{H - BOTTOM + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="10">{_num(t)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{LEFT - 6}" y="{_num(py(t) + 3)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{_num(t)}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 16 {TOP + ph / 2})">{_esc(ylabel)}</text>')
    for i, (label, x, y) in enumerate(data):
        color = COLORS[i % len(COLORS)]
        if x.size:
            pts = " ".join(f"{_num(px(a))},{_num(py(b))}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{LEFT + 8}" y="{TOP + 14 + 14 * i}" font-family="sans-serif" font-size="11" '
                   f'fill="{color}">{_esc(str(label))}</text>')
    out.append("</svg>")
    _write(path, out)


def _color(level: float) -> str:
    pos = level * (len(_RAMP) - 1)
    i = min(int(pos), len(_RAMP) - 2)
    rgb = _RAMP[i] + (pos - i) * (_RAMP[i + 1] - _RAMP[i])
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def heatmap_levels(values, levels: int = 256) -> np.ndarray:
    """Quantized color index per pixel (row 0 at the top)."""
    v = _finite(values, "heatmap")
    if v.ndim != 2:
        raise RenderError("heatmap needs a 2D array")
    lo, hi = v.min(), v.max()
    scaled = np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo)
    return np.minimum((scaled * levels).astype(int), levels - 1)


def render_heatmap(values, path, title="", extent=None):
    """One rectangle per array element, rows drawn top to bottom."""
    idx = heatmap_levels(values)
    ny, nx = idx.shape
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM
    cw, ch = pw / nx, ph / ny
    out = _header(title)
    palette = [_color(i / 255) for i in range(256)]
    for j in range(ny):
        for i in range(nx):
            out.append(f'<rect x="{_num(LEFT + i * cw)}" y="{_num(TOP + j * ch)}" width="{_num(cw)}" '
                       f'height="{_num(ch)}" fill="{palette[idx[j, i]]}"/>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    if extent is not None:
        x0, x1, y0, y1 = extent
        out.append(f'<text x="{LEFT}" y="{H - BOTTOM + 16}" font-family="sans-serif" font-size="10">{_num(x0)}</text>')
        out.append(f'<text x="{W - RIGHT}" y="{H - BOTTOM + 16}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="10">{_num(x1)}</text>')
        out.append(f'<text x="{LEFT - 6}" y="{H - BOTTOM}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="10">{_num(y0)}</text>')
        out.append(f'<text x="{LEFT - 6}" y="{TOP + 10}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="10">{_num(y1)}</text>')
    out.append("</svg>")
    _write(path, out)


def _write(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

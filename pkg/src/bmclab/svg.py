"""Minimal self-contained SVG line charts.

Produces standalone SVG documents with axes, ticks, a legend, optional
shaded bands, and one polyline per series.  Kept dependency-free so chart
output is byte-reproducible across environments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .errors import ConfigError

PALETTE = ("#000000", "#c62828", "#1565c0", "#2e7d32", "#6a1b9a", "#ef6c00")

_MARGIN_LEFT = 64.0
_MARGIN_RIGHT = 18.0
_MARGIN_TOP = 34.0
_MARGIN_BOTTOM = 46.0


@dataclass(frozen=True)
class Series:
    """One labeled polyline; nonfinite points are dropped."""

    label: str
    x: tuple
    y: tuple
    color: str = ""
    dashed: bool = False


@dataclass(frozen=True)
class Band:
    """A shaded vertical band between two curves over a common grid."""

    x: tuple
    lower: tuple
    upper: tuple
    color: str = "#9e9e9e"


def _finite_pairs(xs, ys):
    return [(float(x), float(y)) for x, y in zip(xs, ys)
            if math.isfinite(x) and math.isfinite(y)]


def _tick_values(lo: float, hi: float, target: int = 6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    power = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * power
        if step >= raw:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    value = first
    while value <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(value) < 1e-12 * step else value)
        value += step
    return ticks


def line_chart(series, *, title: str = "", x_label: str = "", y_label: str = "",
               width: int = 720, height: int = 480, band: Band | None = None) -> str:
    """Render series (and an optional band) to an SVG document string."""
    series = list(series)
    if not series:
        raise ConfigError("line_chart needs at least one series")
    cleaned = []
    for i, s in enumerate(series):
        if len(s.x) != len(s.y):
            raise ConfigError(f"series {s.label!r} has mismatched lengths")
        pts = _finite_pairs(s.x, s.y)
        color = s.color or PALETTE[i % len(PALETTE)]
        cleaned.append((s.label, pts, color, s.dashed))
    all_x = [p[0] for _, pts, _, _ in cleaned for p in pts]
    all_y = [p[1] for _, pts, _, _ in cleaned for p in pts]
    if band is not None:
        if not (len(band.x) == len(band.lower) == len(band.upper)):
            raise ConfigError("band arrays must share one length")
        all_x += [float(v) for v in band.x if math.isfinite(v)]
        for arr in (band.lower, band.upper):
            all_y += [float(v) for v in arr if math.isfinite(v)]
    if not all_x:
        raise ConfigError("no finite data points to plot")

    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    x_pad = 0.05 * (x_hi - x_lo or 1.0)
    y_pad = 0.05 * (y_hi - y_lo or 1.0)
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    plot_w = width - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    def px(x: float) -> float:
        return _MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return _MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    if title:
        out.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{escape(title)}</text>')

    for tick in _tick_values(x_lo, x_hi):
        x = px(tick)
        out.append(f'<line x1="{x:.2f}" y1="{_MARGIN_TOP:.2f}" x2="{x:.2f}" '
                   f'y2="{_MARGIN_TOP + plot_h:.2f}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{x:.2f}" y="{_MARGIN_TOP + plot_h + 16:.2f}" '
                   f'text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{tick:g}</text>')
    for tick in _tick_values(y_lo, y_hi):
        y = py(tick)
        out.append(f'<line x1="{_MARGIN_LEFT:.2f}" y1="{y:.2f}" '
                   f'x2="{_MARGIN_LEFT + plot_w:.2f}" y2="{y:.2f}" '
                   f'stroke="#e0e0e0"/>')
        out.append(f'<text x="{_MARGIN_LEFT - 6:.2f}" y="{y + 4:.2f}" '
                   f'text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{tick:g}</text>')

    if band is not None:
        forward = _finite_pairs(band.x, band.upper)
        backward = _finite_pairs(band.x, band.lower)[::-1]
        if forward and backward:
            points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in forward + backward)
            out.append(f'<polygon points="{points}" fill="{band.color}" '
                       f'fill-opacity="0.25" stroke="none"/>')

    frame = (f'<rect x="{_MARGIN_LEFT:.2f}" y="{_MARGIN_TOP:.2f}" '
             f'width="{plot_w:.2f}" height="{plot_h:.2f}" fill="none" '
             f'stroke="#424242"/>')
    out.append(frame)

    for label, pts, color, dashed in cleaned:
        if not pts:
            continue
        points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        dash = ' stroke-dasharray="6 4"' if dashed else ""
        out.append(f'<polyline points="{points}" fill="none" '
                   f'stroke="{color}" stroke-width="1.8"{dash}/>')

    if x_label:
        out.append(f'<text x="{_MARGIN_LEFT + plot_w / 2:.1f}" '
                   f'y="{height - 8:.1f}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12">'
                   f'{escape(x_label)}</text>')
    if y_label:
        cx, cy = 16.0, _MARGIN_TOP + plot_h / 2
        out.append(f'<text x="{cx:.1f}" y="{cy:.1f}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12" '
                   f'transform="rotate(-90 {cx:.1f} {cy:.1f})">'
                   f'{escape(y_label)}</text>')

    legend_y = _MARGIN_TOP + 10
    legend_x = _MARGIN_LEFT + plot_w - 150
    for label, _, color, dashed in cleaned:
        if not label:
            continue
        dash = ' stroke-dasharray="6 4"' if dashed else ""
        out.append(f'<line x1="{legend_x:.1f}" y1="{legend_y:.1f}" '
                   f'x2="{legend_x + 24:.1f}" y2="{legend_y:.1f}" '
                   f'stroke="{color}" stroke-width="1.8"{dash}/>')
        out.append(f'<text x="{legend_x + 30:.1f}" y="{legend_y + 4:.1f}" '
                   f'font-family="sans-serif" font-size="11">'
                   f'{escape(label)}</text>')
        legend_y += 16

    out.append("</svg>")
    return "\n".join(out)

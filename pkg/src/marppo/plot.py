"""Self-contained SVG line plots for training curves.

No plotting dependency: the chart is assembled as text. Each series draws
inside a single ``<g transform>`` that maps data coordinates to pixels, so the
polyline/polygon points in the file are the raw data values (inspectable and
testable); ``vector-effect: non-scaling-stroke`` keeps line widths in pixel
units despite the scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from marppo.nn import ContractError

Array = np.ndarray

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

MARGIN_LEFT = 62
MARGIN_RIGHT = 16
MARGIN_TOP = 30
MARGIN_BOTTOM = 46


@dataclass
class Series:
    """One curve, optionally with a shaded band (e.g. mean +/- std)."""

    label: str
    x: Array
    y: Array
    band_lo: Array | None = None
    band_hi: Array | None = None

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.shape != self.y.shape or self.x.ndim != 1 or self.x.size == 0:
            raise ContractError(f"series {self.label!r}: x and y must be equal-length 1-D")
        for band in (self.band_lo, self.band_hi):
            if band is not None and np.asarray(band).shape != self.x.shape:
                raise ContractError(f"series {self.label!r}: band shape mismatch")
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise ContractError(f"series {self.label!r}: non-finite data")


def tick_positions(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick positions covering [lo, hi] with a 1/2/5 step."""
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(target, 1)
    power = 10.0 ** math.floor(math.log10(raw))
    step = next(m * power for m in (1.0, 2.0, 5.0, 10.0) if m * power >= raw)
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _fmt(v: float) -> str:
    return format(float(v), "g")


def render_svg(series: list[Series], title: str = "", xlabel: str = "",
               ylabel: str = "", width: int = 640, height: int = 400) -> str:
    if not series:
        raise ContractError("nothing to plot")
    xs = np.concatenate([s.x for s in series])
    ys = [s.y for s in series]
    for s in series:
        if s.band_lo is not None:
            ys.extend([np.asarray(s.band_lo), np.asarray(s.band_hi)])
    ys = np.concatenate(ys)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    plot_w = width - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = height - MARGIN_TOP - MARGIN_BOTTOM
    sx = plot_w / (x1 - x0)
    sy = plot_h / (y1 - y0)
    # rightmost transform applies first: shift to the data origin, flip and
    # scale into pixels, then move into the plot rectangle
    transform = (f"translate({MARGIN_LEFT},{height - MARGIN_BOTTOM}) "
                 f"scale({_fmt(sx)},{_fmt(-sy)}) translate({_fmt(-x0)},{_fmt(-y0)})")

    def px(v: float) -> float:
        return MARGIN_LEFT + (v - x0) * sx

    def py(v: float) -> float:
        return height - MARGIN_BOTTOM - (v - y0) * sy

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:g}" y="18" text-anchor="middle" '
                     f'font-size="14">{escape(title)}</text>')

    for v in tick_positions(x0, x1):
        x = px(v)
        parts.append(f'<line x1="{x:g}" y1="{MARGIN_TOP}" x2="{x:g}" '
                     f'y2="{height - MARGIN_BOTTOM}" stroke="#dddddd"/>')
        parts.append(f'<text x="{x:g}" y="{height - MARGIN_BOTTOM + 16}" '
                     f'text-anchor="middle">{_fmt(v)}</text>')
    for v in tick_positions(y0, y1):
        y = py(v)
        parts.append(f'<line x1="{MARGIN_LEFT}" y1="{y:g}" x2="{width - MARGIN_RIGHT}" '
                     f'y2="{y:g}" stroke="#dddddd"/>')
        parts.append(f'<text x="{MARGIN_LEFT - 6}" y="{y + 4:g}" '
                     f'text-anchor="end">{_fmt(v)}</text>')
    parts.append(f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" '
                 f'height="{plot_h}" fill="none" stroke="#333333"/>')
    if xlabel:
        parts.append(f'<text x="{MARGIN_LEFT + plot_w / 2:g}" y="{height - 10}" '
                     f'text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        parts.append(f'<text x="16" y="{MARGIN_TOP + plot_h / 2:g}" text-anchor="middle" '
                     f'transform="rotate(-90 16 {MARGIN_TOP + plot_h / 2:g})">{escape(ylabel)}</text>')

    for idx, s in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        label = escape(s.label, {'"': "&quot;"})
        parts.append(f'<g transform="{transform}">')
        if s.band_lo is not None:
            ring = ([f"{_fmt(x)},{_fmt(lo)}" for x, lo in zip(s.x, s.band_lo)]
                    + [f"{_fmt(x)},{_fmt(hi)}" for x, hi in zip(s.x[::-1], np.asarray(s.band_hi)[::-1])])
            parts.append(f'<polygon data-label="{label} band" points="{" ".join(ring)}" '
                         f'fill="{color}" fill-opacity="0.15" stroke="none"/>')
        if s.x.size > 1:
            pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(s.x, s.y))
            parts.append(f'<polyline data-label="{label}" points="{pts}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5" '
                         f'vector-effect="non-scaling-stroke"/>')
        parts.append("</g>")
        if s.x.size == 1:
            # a lone point would be an invisible polyline; mark it in pixel
            # space so the radius is not distorted by the data transform
            parts.append(f'<circle data-label="{label}" cx="{px(float(s.x[0])):g}" '
                         f'cy="{py(float(s.y[0])):g}" r="3" fill="{color}"/>')

    ly = MARGIN_TOP + 10
    for idx, s in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        parts.append(f'<rect x="{width - MARGIN_RIGHT - 150}" y="{ly - 9}" width="18" '
                     f'height="4" fill="{color}"/>')
        parts.append(f'<text x="{width - MARGIN_RIGHT - 126}" y="{ly - 2}">{escape(s.label)}</text>')
        ly += 16
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def plot_learning_curves(runs: list[tuple[str, Array, Array, Array]], out_path: str,
                         title: str = "training curves", xlabel: str = "iteration",
                         ylabel: str = "mean evaluation return") -> None:
    """Writes an SVG of per-arm mean curves with +/- one std bands.

    ``runs`` is a list of (label, iterations, mean, std) arrays.
    """
    series = []
    for label, x, mean, std in runs:
        mean = np.asarray(mean, dtype=np.float64)
        std = np.asarray(std, dtype=np.float64)
        series.append(Series(label, x, mean, band_lo=mean - std, band_hi=mean + std))
    svg = render_svg(series, title=title, xlabel=xlabel, ylabel=ylabel)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(svg)

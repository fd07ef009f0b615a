"""Minimal self-contained SVG line plots (axes, ticks, polylines, legend)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import BadParameter

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=72, right=24, top=40, bottom=56)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass(frozen=True)
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    dashed: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _log_ticks(lo: float, hi: float) -> list[float]:
    return [float(e) for e in range(math.floor(lo), math.ceil(hi) + 1)]


def _label(v: float, log: bool) -> str:
    if log:
        return f"1e{int(v)}"
    return f"{v:.6g}"


class _Axis:
    def __init__(self, values: np.ndarray, log: bool, pix_lo: float, pix_hi: float):
        self.log = log
        v = np.log10(values) if log else values
        lo, hi = float(np.min(v)), float(np.max(v))
        if hi == lo:
            pad = 0.5 if lo == 0 else abs(lo) * 0.1
            lo, hi = lo - pad, hi + pad
        self.ticks = _log_ticks(lo, hi) if log else _nice_ticks(lo, hi)
        self.lo = min(lo, self.ticks[0])
        self.hi = max(hi, self.ticks[-1])
        self.pix_lo, self.pix_hi = pix_lo, pix_hi

    def transform(self, values) -> np.ndarray:
        v = np.log10(values) if self.log else np.asarray(values, dtype=float)
        frac = (v - self.lo) / (self.hi - self.lo)
        return self.pix_lo + frac * (self.pix_hi - self.pix_lo)


def line_plot(series: list[Series], title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False) -> str:
    """Render the series as an SVG document string."""
    if not series:
        raise BadParameter("nothing to plot")
    clean = []
    for s in series:
        x = np.asarray(s.x, dtype=float)
        y = np.asarray(s.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise BadParameter(f"series {s.label!r}: x and y must be equal-length vectors")
        keep = np.isfinite(x) & np.isfinite(y)
        if logx:
            keep &= x > 0
        if logy:
            keep &= y > 0
        if not np.any(keep):
            raise BadParameter(f"series {s.label!r} has no plottable points")
        clean.append(Series(s.label, x[keep], y[keep], s.dashed))
    allx = np.concatenate([s.x for s in clean])
    ally = np.concatenate([s.y for s in clean])
    left, right = MARGIN["left"], WIDTH - MARGIN["right"]
    top, bottom = MARGIN["top"], HEIGHT - MARGIN["bottom"]
    ax = _Axis(allx, logx, left, right)
    ay = _Axis(ally, logy, bottom, top)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>')
    # grid and ticks
    for t in ax.ticks:
        px = float(ax.transform(10**t if logx else t))
        out.append(f'<line x1="{_fmt(px)}" y1="{top}" x2="{_fmt(px)}" y2="{bottom}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{_fmt(px)}" y="{bottom + 18}" text-anchor="middle">{_label(t, logx)}</text>')
    for t in ay.ticks:
        py = float(ay.transform(10**t if logy else t))
        out.append(f'<line x1="{left}" y1="{_fmt(py)}" x2="{right}" y2="{_fmt(py)}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(py + 4)}" text-anchor="end">{_label(t, logy)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
               f'fill="none" stroke="black"/>')
    if xlabel:
        out.append(f'<text x="{(left + right) / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        cy = (top + bottom) / 2
        out.append(f'<text x="16" y="{cy:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {cy:.1f})">{escape(ylabel)}</text>')
    # curves
    for i, s in enumerate(clean):
        color = COLORS[i % len(COLORS)]
        px = ax.transform(s.x)
        py = ay.transform(s.y)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, py))
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{pts}"/>')
        if len(s.x) <= 40:
            for a, b in zip(px, py):
                out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="2.5" fill="{color}"/>')
    # legend
    for i, s in enumerate(clean):
        color = COLORS[i % len(COLORS)]
        y = top + 16 + 16 * i
        out.append(f'<line x1="{right - 150}" y1="{y - 4}" x2="{right - 126}" y2="{y - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{right - 120}" y="{y}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

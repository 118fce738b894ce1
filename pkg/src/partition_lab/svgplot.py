"""Minimal self-contained SVG line charts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from html import escape
from typing import Sequence

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555")


@dataclass
class Series:
    name: str
    x: Sequence[float]
    y: Sequence[float]
    color: str | None = None
    dashed: bool = False


@dataclass
class Chart:
    title: str
    xlabel: str = ""
    ylabel: str = ""
    series: list[Series] = field(default_factory=list)
    hlines: list[float] = field(default_factory=list)
    markers: list[tuple[float, float, str]] = field(default_factory=list)
    width: int = 640
    height: int = 400

    def add(self, name, x, y, **kw) -> "Chart":
        self.series.append(Series(name, list(map(float, x)), list(map(float, y)), **kw))
        return self


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + step * 1e-9, step)]


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def render(chart: Chart) -> str:
    W, H = chart.width, chart.height
    ml, mr, mt, mb = 64, 150, 36, 48
    pw, ph = W - ml - mr, H - mt - mb

    xs = [v for s in chart.series for v in s.x if math.isfinite(v)]
    ys = [v for s in chart.series for v in s.y if math.isfinite(v)]
    ys += list(chart.hlines) + [m[1] for m in chart.markers]
    xs += [m[0] for m in chart.markers]
    if not xs or not ys:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{ml + pw / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(chart.title)}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{mt + ph}" x2="{px(t):.2f}" y2="{mt + ph + 4}" stroke="#333"/>')
        out.append(f'<text x="{px(t):.2f}" y="{mt + ph + 16}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{ml - 4}" y1="{py(t):.2f}" x2="{ml}" y2="{py(t):.2f}" stroke="#333"/>')
        out.append(f'<text x="{ml - 6}" y="{py(t) + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    if chart.xlabel:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="{H - 10}" text-anchor="middle">{escape(chart.xlabel)}</text>')
    if chart.ylabel:
        out.append(
            f'<text x="14" y="{mt + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {mt + ph / 2:.1f})">{escape(chart.ylabel)}</text>'
        )
    for h in chart.hlines:
        out.append(f'<line x1="{ml}" y1="{py(h):.2f}" x2="{ml + pw}" y2="{py(h):.2f}" stroke="#999" stroke-dasharray="4 3"/>')

    for i, s in enumerate(chart.series):
        color = s.color or PALETTE[i % len(PALETTE)]
        pts = " ".join(
            f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s.x, s.y) if math.isfinite(a) and math.isfinite(b)
        )
        dash = ' stroke-dasharray="6 3"' if s.dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>')
        ly = mt + 14 + 16 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 30}" y2="{ly - 4}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{ml + pw + 34}" y="{ly}">{escape(s.name)}</text>')

    for mx, my, label in chart.markers:
        out.append(f'<circle cx="{px(mx):.2f}" cy="{py(my):.2f}" r="4" fill="none" stroke="black"/>')
        out.append(f'<text x="{px(mx) + 6:.2f}" y="{py(my) - 6:.2f}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write(chart: Chart, path) -> None:
    from pathlib import Path

    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(render(chart))

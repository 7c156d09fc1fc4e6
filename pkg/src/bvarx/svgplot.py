"""Minimal static SVG emission for the experiment plots.

Deliberately tiny: scatter circles, solid/dashed/dotted polylines, linear
axes with a handful of ticks.  Output is a pure function of the data; no
timestamps or environment state, so re-renders are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class Series:
    x: list
    y: list
    label: str = ""
    style: str = "circles"  # circles | line | dashed | dotted
    color: str = "#1f3b73"


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    series: list = field(default_factory=list)


def _fmt(v):
    return format(float(v), ".6g")


def _ticks(lo, hi, n=5):
    if not math.isfinite(lo) or not math.isfinite(hi):
        lo, hi = 0.0, 1.0
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * span:
        ticks.append(t)
        t += step
    return ticks


def _panel_svg(panel: Panel, x0, y0, w, h):
    xs = [v for s in panel.series for v in s.x if math.isfinite(v)]
    ys = [v for s in panel.series for v in s.y if math.isfinite(v)]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    xpad = 0.05 * (xhi - xlo)
    ypad = 0.08 * (yhi - ylo)
    xlo, xhi = xlo - xpad, xhi + xpad
    ylo, yhi = ylo - ypad, yhi + ypad

    left, bottom, top = 62, 42, 26
    pw, ph = w - left - 14, h - bottom - top

    def sx(v):
        return x0 + left + (v - xlo) / (xhi - xlo) * pw

    def sy(v):
        return y0 + top + (yhi - v) / (yhi - ylo) * ph

    out = []
    out.append(
        f'<rect x="{x0 + left}" y="{y0 + top}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#444" stroke-width="1"/>'
    )
    out.append(
        f'<text x="{x0 + left + pw / 2}" y="{y0 + 16}" text-anchor="middle" '
        f'font-size="13" font-family="sans-serif">{panel.title}</text>'
    )
    for t in _ticks(xlo + xpad, xhi - xpad):
        px = sx(t)
        out.append(
            f'<line x1="{_fmt(px)}" y1="{_fmt(y0 + top + ph)}" x2="{_fmt(px)}" '
            f'y2="{_fmt(y0 + top + ph + 4)}" stroke="#444"/>'
        )
        out.append(
            f'<text x="{_fmt(px)}" y="{_fmt(y0 + top + ph + 16)}" text-anchor="middle" '
            f'font-size="10" font-family="sans-serif">{_fmt(t)}</text>'
        )
    for t in _ticks(ylo + ypad, yhi - ypad):
        py = sy(t)
        out.append(
            f'<line x1="{_fmt(x0 + left - 4)}" y1="{_fmt(py)}" x2="{_fmt(x0 + left)}" '
            f'y2="{_fmt(py)}" stroke="#444"/>'
        )
        out.append(
            f'<text x="{_fmt(x0 + left - 6)}" y="{_fmt(py + 3)}" text-anchor="end" '
            f'font-size="10" font-family="sans-serif">{_fmt(t)}</text>'
        )
    out.append(
        f'<text x="{x0 + left + pw / 2}" y="{y0 + h - 6}" text-anchor="middle" '
        f'font-size="11" font-family="sans-serif">{panel.xlabel}</text>'
    )
    out.append(
        f'<text x="{x0 + 14}" y="{y0 + top + ph / 2}" text-anchor="middle" '
        f'font-size="11" font-family="sans-serif" '
        f'transform="rotate(-90 {x0 + 14} {y0 + top + ph / 2})">{panel.ylabel}</text>'
    )

    legend_y = y0 + top + 12
    for s in panel.series:
        pts = [(sx(a), sy(b)) for a, b in zip(s.x, s.y)
               if math.isfinite(a) and math.isfinite(b)]
        if not pts:
            continue
        if s.style == "circles":
            for px, py in pts:
                out.append(
                    f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="none" '
                    f'stroke="{s.color}" stroke-width="1.2"/>'
                )
        else:
            dash = {"line": "", "dashed": ' stroke-dasharray="6,4"',
                    "dotted": ' stroke-dasharray="2,3"'}[s.style]
            path = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in pts)
            out.append(
                f'<polyline points="{path}" fill="none" stroke="{s.color}" '
                f'stroke-width="1.3"{dash}/>'
            )
        if s.label:
            out.append(
                f'<text x="{_fmt(x0 + left + 8)}" y="{_fmt(legend_y)}" font-size="10" '
                f'font-family="sans-serif" fill="{s.color}">{s.label}</text>'
            )
            legend_y += 13
    return "\n".join(out)


def render_panels(panels, path, panel_width=380, panel_height=300):
    """Render panels side by side into one SVG file."""
    width = panel_width * len(panels)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{panel_height}" viewBox="0 0 {width} {panel_height}">',
        f'<rect width="{width}" height="{panel_height}" fill="white"/>',
    ]
    for i, panel in enumerate(panels):
        parts.append(_panel_svg(panel, i * panel_width, 0, panel_width, panel_height))
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")

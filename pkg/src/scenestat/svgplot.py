"""Direct-emission SVG scatter plots, deterministic byte-for-byte."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

PANEL_W = 360
PANEL_H = 300
MARGIN_L = 56
MARGIN_B = 46
MARGIN_T = 30
MARGIN_R = 14


@dataclass(frozen=True)
class ScatterPanel:
    title: str
    x_label: str
    y_label: str
    xs: Sequence[float]
    ys: Sequence[float]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    raw_step = (hi - lo) / (n - 1)
    magnitude = 10.0 ** math.floor(math.log10(raw_step))
    for mult in (1, 2, 2.5, 5, 10):
        step = mult * magnitude
        if step >= raw_step:
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _panel_svg(panel: ScatterPanel, x_offset: int) -> list[str]:
    xs, ys = list(panel.xs), list(panel.ys)
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    x_pad = 0.04 * (x_hi - x_lo)
    y_pad = 0.04 * (y_hi - y_lo)
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    plot_w = PANEL_W - MARGIN_L - MARGIN_R
    plot_h = PANEL_H - MARGIN_T - MARGIN_B

    def px(v: float) -> float:
        return x_offset + MARGIN_L + (v - x_lo) / (x_hi - x_lo) * plot_w

    def py(v: float) -> float:
        return MARGIN_T + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h

    left, right = x_offset + MARGIN_L, x_offset + PANEL_W - MARGIN_R
    top, bottom = MARGIN_T, MARGIN_T + plot_h
    out = [
        f'<text x="{x_offset + PANEL_W / 2:.1f}" y="18" text-anchor="middle" '
        f'font-size="13" font-weight="bold">{panel.title}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        x = px(t)
        out.append(f'<line x1="{x:.1f}" y1="{bottom}" x2="{x:.1f}" y2="{bottom + 4}" stroke="black"/>')
        out.append(
            f'<text x="{x:.1f}" y="{bottom + 16}" text-anchor="middle" font-size="10">{_fmt(t)}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        out.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        out.append(
            f'<text x="{left - 6}" y="{y + 3:.1f}" text-anchor="end" font-size="10">{_fmt(t)}</text>'
        )
    out.append(
        f'<text x="{x_offset + MARGIN_L + plot_w / 2:.1f}" y="{PANEL_H - 8}" '
        f'text-anchor="middle" font-size="11">{panel.x_label}</text>'
    )
    out.append(
        f'<text x="{x_offset + 14}" y="{MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-size="11" transform="rotate(-90 {x_offset + 14} {MARGIN_T + plot_h / 2:.1f})">'
        f"{panel.y_label}</text>"
    )
    for x, y in zip(xs, ys):
        out.append(
            f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="steelblue" '
            f'fill-opacity="0.6" stroke="none"/>'
        )
    return out


def scatter_svg(panels: Sequence[ScatterPanel]) -> str:
    width = PANEL_W * len(panels)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" '
        f'viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif">',
        f'<rect width="{width}" height="{PANEL_H}" fill="white"/>',
    ]
    for i, panel in enumerate(panels):
        parts.extend(_panel_svg(panel, i * PANEL_W))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

"""Minimal hand-rolled SVG output: line plots and scatter plots.

No plotting dependency; coordinates are printed at 9 significant digits
so files are byte-stable across reruns.
"""

from __future__ import annotations

import math
from pathlib import Path

_W, _H = 640, 480
_MARGIN = 56

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _f(x: float) -> str:
    return f"{x:.9g}"


def _scale(vals, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in vals]


def _frame(title: str, xlabel: str, ylabel: str,
           xlo: float, xhi: float, ylo: float, yhi: float) -> list[str]:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_W - 2 * _MARGIN}" '
        f'height="{_H - 2 * _MARGIN}" fill="none" stroke="black"/>',
        f'<text x="{_W / 2}" y="24" text-anchor="middle" font-size="15">{title}</text>',
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="16" y="{_H / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_H / 2})">{ylabel}</text>',
        f'<text x="{_MARGIN}" y="{_H - _MARGIN + 16}" font-size="10">{_f(xlo)}</text>',
        f'<text x="{_W - _MARGIN}" y="{_H - _MARGIN + 16}" text-anchor="end" '
        f'font-size="10">{_f(xhi)}</text>',
        f'<text x="{_MARGIN - 4}" y="{_H - _MARGIN}" text-anchor="end" '
        f'font-size="10">{_f(ylo)}</text>',
        f'<text x="{_MARGIN - 4}" y="{_MARGIN + 10}" text-anchor="end" '
        f'font-size="10">{_f(yhi)}</text>',
    ]
    return parts


def line_plot(path: str | Path, xs, series: dict[str, list[float]],
              title: str = "", xlabel: str = "", ylabel: str = "") -> None:
    xs = list(xs)
    ys_all = [v for vals in series.values() for v in vals if math.isfinite(v)]
    if not xs or not ys_all:
        raise ValueError("nothing to plot")
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys_all), max(ys_all)
    if yhi == ylo:
        yhi = ylo + 1.0
    parts = _frame(title, xlabel, ylabel, xlo, xhi, ylo, yhi)
    px = _scale(xs, xlo, xhi, _MARGIN, _W - _MARGIN)
    for idx, (name, ys) in enumerate(series.items()):
        col = _PALETTE[idx % len(_PALETTE)]
        py = _scale(ys, ylo, yhi, _H - _MARGIN, _MARGIN)
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(px, py))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{_W - _MARGIN - 4}" y="{_MARGIN + 14 + 14 * idx}" '
                     f'text-anchor="end" font-size="11" fill="{col}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def scatter_plot(path: str | Path, xs, ys, title: str = "", xlabel: str = "",
                 ylabel: str = "", diagonal: bool = False) -> None:
    xs, ys = list(xs), list(ys)
    if not xs:
        raise ValueError("nothing to plot")
    lo = min(min(xs), min(ys))
    hi = max(max(xs), max(ys))
    if hi == lo:
        hi = lo + 1.0
    parts = _frame(title, xlabel, ylabel, lo, hi, lo, hi)
    px = _scale(xs, lo, hi, _MARGIN, _W - _MARGIN)
    py = _scale(ys, lo, hi, _H - _MARGIN, _MARGIN)
    if diagonal:
        parts.append(f'<line x1="{_MARGIN}" y1="{_H - _MARGIN}" '
                     f'x2="{_W - _MARGIN}" y2="{_MARGIN}" '
                     f'stroke="#aaaaaa" stroke-dasharray="4 3"/>')
    for a, b in zip(px, py):
        parts.append(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="2.5" '
                     f'fill="#1f77b4" fill-opacity="0.7"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")

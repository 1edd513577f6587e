"""Tiny static SVG plotter: polylines/points over linear or log-10 axes.

Deliberately minimal; the experiment CSVs are the primary artifact and these
plots are passive views of their columns.
"""

from __future__ import annotations

import math
from typing import Sequence

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 64, 16, 28, 44


def _transform(vals, lo, hi, out_lo, out_hi, log):
    out = []
    for v in vals:
        if log:
            v = math.log10(v)
        t = (v - lo) / (hi - lo) if hi > lo else 0.5
        out.append(out_lo + t * (out_hi - out_lo))
    return out


def _ticks(lo, hi, log):
    if log:
        lo_i, hi_i = math.floor(lo), math.ceil(hi)
        step = max(1, (hi_i - lo_i) // 6)
        return [(v, f"1e{v:d}") for v in range(lo_i, hi_i + 1, step)]
    span = hi - lo or 1.0
    step = 10 ** math.floor(math.log10(span / 4))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * span:
        ticks.append((v, f"{v:g}"))
        v += step
    return ticks


def polyline_plot(
    series: Sequence[tuple],
    path: str,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    log_y: bool = False,
    points: bool = False,
) -> None:
    """series: iterable of (label, xs, ys); writes an SVG file."""
    xs_all, ys_all = [], []
    clean = []
    for label, xs, ys in series:
        pairs = [
            (float(x), float(y))
            for x, y in zip(xs, ys)
            if math.isfinite(float(x))
            and math.isfinite(float(y))
            and (not log_y or float(y) > 0.0)
        ]
        clean.append((label, pairs))
        xs_all += [p[0] for p in pairs]
        ys_all += [p[1] for p in pairs]
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [1.0, 1.0]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_vals = [math.log10(y) for y in ys_all] if log_y else ys_all
    y_lo, y_hi = min(y_vals), max(y_vals)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="16" text-anchor="middle" font-size="13">{title}</text>',
    ]
    x0, x1 = _ML, _W - _MR
    y0, y1 = _H - _MB, _MT
    parts.append(
        f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
        'fill="none" stroke="#333"/>'
    )
    for v, lab in _ticks(x_lo, x_hi, False):
        px = _transform([v], x_lo, x_hi, x0, x1, False)[0]
        parts.append(f'<line x1="{px}" y1="{y0}" x2="{px}" y2="{y0 + 4}" stroke="#333"/>')
        parts.append(f'<text x="{px}" y="{y0 + 16}" text-anchor="middle">{lab}</text>')
    for v, lab in _ticks(y_lo, y_hi, log_y):
        py = _transform([10 ** v if log_y else v], y_lo, y_hi, y0, y1, log_y)[0]
        parts.append(f'<line x1="{x0 - 4}" y1="{py}" x2="{x0}" y2="{py}" stroke="#333"/>')
        parts.append(
            f'<text x="{x0 - 6}" y="{py + 3}" text-anchor="end">{lab}</text>'
        )
    parts.append(
        f'<text x="{(x0 + x1) / 2}" y="{_H - 8}" text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="14" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {(y0 + y1) / 2})">{ylabel}</text>'
    )
    for i, (label, pairs) in enumerate(clean):
        if not pairs:
            continue
        color = _COLORS[i % len(_COLORS)]
        px = _transform([p[0] for p in pairs], x_lo, x_hi, x0, x1, False)
        py = _transform([p[1] for p in pairs], y_lo, y_hi, y0, y1, log_y)
        if points:
            for a, b in zip(px, py):
                parts.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.4" fill="{color}"/>')
        else:
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.4"/>'
            )
        parts.append(
            f'<text x="{x1 - 6}" y="{y1 + 14 + 13 * i}" text-anchor="end" '
            f'fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))

"""Tiny dependency-free SVG line plots."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


def write_svg(path, x, series: dict, title: str = "", xlabel: str = "t (s)", ylabel: str = "",
              width: int = 720, height: int = 420, max_points: int = 2000) -> None:
    x = np.asarray(x, dtype=float)
    left, right, top, bottom = 70, 20, 30, 50
    pw, ph = width - left - right, height - top - bottom
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    ymin = min(float(np.min(y)) for y in ys) if ys else 0.0
    ymax = max(float(np.max(y)) for y in ys) if ys else 1.0
    if ymax == ymin:
        ymin, ymax = ymin - 1.0, ymax + 1.0
    pad = 0.05 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad
    xmin, xmax = float(x.min()), float(x.max()) if x.size else 1.0
    if xmax == xmin:
        xmax = xmin + 1.0

    def sx(v):
        return left + (v - xmin) / (xmax - xmin) * pw

    def sy(v):
        return top + (ymax - v) / (ymax - ymin) * ph

    step = max(1, len(x) // max_points)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{top + ph / 2}" transform="rotate(-90 14 {top + ph / 2})" text-anchor="middle">{escape(ylabel)}</text>',
    ]
    for tx in _ticks(xmin, xmax):
        if xmin <= tx <= xmax:
            parts.append(f'<line x1="{sx(tx):.1f}" y1="{top + ph}" x2="{sx(tx):.1f}" y2="{top + ph + 5}" stroke="#444"/>')
            parts.append(f'<text x="{sx(tx):.1f}" y="{top + ph + 18}" text-anchor="middle">{tx:.4g}</text>')
    for ty in _ticks(ymin, ymax):
        if ymin <= ty <= ymax:
            parts.append(f'<line x1="{left - 5}" y1="{sy(ty):.1f}" x2="{left}" y2="{sy(ty):.1f}" stroke="#444"/>')
            parts.append(f'<text x="{left - 8}" y="{sy(ty) + 4:.1f}" text-anchor="end">{ty:.4g}</text>')
    for i, (name, y) in enumerate(zip(series, ys)):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[::step], y[::step]))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{pts}"/>')
        parts.append(f'<text x="{left + pw - 6}" y="{top + 16 + 14 * i}" text-anchor="end" fill="{color}">{escape(str(name))}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))

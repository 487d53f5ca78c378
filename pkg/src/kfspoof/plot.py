"""Minimal SVG line plots (one polyline per series, shared axes)."""

from typing import Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")

Series = Tuple[str, Sequence[float], Sequence[float]]


def _range(values):
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    return lo, hi


def svg_lines(series: Sequence[Series], title: str = "", xlabel: str = "", ylabel: str = "",
              width: int = 640, height: int = 400) -> str:
    if not series:
        raise ValueError("nothing to plot")
    pad_l, pad_r, pad_t, pad_b = 60, 20, 30, 45
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    x0, x1 = _range(xs)
    y0, y1 = _range(ys)
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def py(y):
        return pad_t + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
           f'<text x="{width / 2}" y="18" text-anchor="middle">{escape(title)}</text>',
           f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="14" y="{height / 2}" text-anchor="middle" '
           f'transform="rotate(-90 14 {height / 2})">{escape(ylabel)}</text>']
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        out.append(f'<text x="{px(xv):.1f}" y="{pad_t + ph + 16}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{pad_l - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
    for i, (label, sx, sy) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(sx, sy))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{pad_l + 8}" y="{pad_t + 16 + 14 * i}" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path: str, series: Sequence[Series], **kw) -> None:
    with open(path, "w") as fh:
        fh.write(svg_lines(series, **kw))

"""Minimal SVG line plots: polylines inside a framed box with min/max labels."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

_COLOURS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def line_plot(series, title: str = "", xlabel: str = "", ylabel: str = "", width: int = 480,
              height: int = 360, equal_aspect: bool = False, logx: bool = False, logy: bool = False) -> str:
    """``series`` is a list of ``(x, y, label)``; returns the SVG document."""
    pad = 50
    tx = (lambda v: np.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: np.log10(v)) if logy else (lambda v: v)
    data = []
    for x, y, label in series:
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        data.append((tx(x[ok]), ty(y[ok]), label))
    allx = np.concatenate([d[0] for d in data]) if data else np.zeros(1)
    ally = np.concatenate([d[1] for d in data]) if data else np.zeros(1)
    if allx.size == 0:
        allx, ally = np.zeros(1), np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    sx = (width - 2 * pad) / (x1 - x0)
    sy = (height - 2 * pad) / (y1 - y0)
    if equal_aspect:
        sx = sy = min(sx, sy)

    def px(v):
        return pad + (v - x0) * sx

    def py(v):
        return height - pad - (v - y0) * sy

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
           'fill="none" stroke="black"/>']
    fmt = "{:.3g}"
    lab = (lambda v: "1e" + fmt.format(v)) if logx else fmt.format
    out.append(f'<text x="{pad}" y="{height - pad + 15}" font-size="10">{lab(x0)}</text>')
    out.append(f'<text x="{width - pad}" y="{height - pad + 15}" font-size="10" text-anchor="end">{lab(x1)}</text>')
    laby = (lambda v: "1e" + fmt.format(v)) if logy else fmt.format
    out.append(f'<text x="{pad - 4}" y="{height - pad}" font-size="10" text-anchor="end">{laby(y0)}</text>')
    out.append(f'<text x="{pad - 4}" y="{pad + 10}" font-size="10" text-anchor="end">{laby(y1)}</text>')
    out.append(f'<text x="{width / 2}" y="{pad / 2}" font-size="13" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 10}" font-size="11" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="12" y="{height / 2}" font-size="11" transform="rotate(-90 12 {height / 2})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    for i, (x, y, label) in enumerate(data):
        c = _COLOURS[i % len(_COLOURS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{width - pad - 4}" y="{pad + 14 + 13 * i}" font-size="10" fill="{c}" '
                   f'text-anchor="end">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

"""Dependency-free SVG scatter plots of generated samples, coloured by group."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"]

WIDTH, HEIGHT = 480, 400
PLOT = (40, 20, 360, 360)  # x, y, w, h of the data area


def _color(g: int) -> str:
    return PALETTE[g % len(PALETTE)]


def scatter_svg(samples, labels, k: int | None = None, rates=None, title: str = "") -> str:
    x = np.asarray(samples, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if x.ndim != 2 or (x.size and x.shape[1] < 1):
        raise ValueError("samples must be n x d")
    if x.shape[0] and x.shape[1] == 1:
        x = np.concatenate([x, np.zeros_like(x)], axis=1)
    pts = x[:, :2]  # higher dims are projected onto the first two
    if k is None:
        k = int(labels.max()) + 1 if labels.size else 1
    if rates is None:
        counts = np.bincount(labels[labels >= 0], minlength=k) if labels.size else np.zeros(k)
        rates = counts / max(len(labels), 1)

    px, py, pw, ph = PLOT
    if len(pts):
        lo, hi = pts.min(axis=0), pts.max(axis=0)
    else:
        lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    lo, span = lo - 0.05 * span, span * 1.1

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
           f'<rect x="{px}" y="{py}" width="{pw}" height="{ph}" fill="none" stroke="#444444"/>']
    if title:
        out.append(f'<text x="{px}" y="14" font-size="11" font-family="sans-serif">{escape(title)}</text>')
    for (a, b), g in zip(pts, labels):
        cx = px + (a - lo[0]) / span[0] * pw
        cy = py + ph - (b - lo[1]) / span[1] * ph
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="1.8" fill="{_color(int(g))}" fill-opacity="0.6"/>')
    out.append('<g font-size="11" font-family="sans-serif">')
    for g in range(k):
        y = py + 12 + 16 * g
        out.append(f'<rect x="{px + pw + 10}" y="{y - 9}" width="10" height="10" fill="{_color(g)}"/>')
        out.append(f'<text x="{px + pw + 24}" y="{y}">group {g}: {float(rates[g]):.3f}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_scatter_svg(samples, labels, path, k: int | None = None, rates=None, title: str = "") -> Path:
    path = Path(path)
    path.write_text(scatter_svg(samples, labels, k, rates, title), encoding="utf-8")
    return path

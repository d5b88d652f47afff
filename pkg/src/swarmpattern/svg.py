"""Tiny SVG writer for step histograms and continuum trajectories.

Output depends only on the data, so equal inputs give byte-identical files.
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


def _f(v: float) -> str:
    return f"{v:.2f}"


def _doc(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>", ""])


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def histogram(groups: Mapping[str, Sequence[float]], title: str = "", bins: int = 20,
              log_x: bool = True, xlabel: str = "steps to convergence") -> str:
    """Overlaid step histograms, one outline per group, on shared bins."""
    width, height, ml, mr, mt, mb = 640, 360, 50, 130, 30, 40
    pw, ph = width - ml - mr, height - mt - mb
    vals = [np.asarray(v, float) for v in groups.values()]
    allv = np.concatenate(vals) if vals else np.zeros(0)
    allv = allv[np.isfinite(allv)]
    body = [f'<text x="{ml}" y="18">{_esc(title)}</text>']
    if log_x:
        allv = allv[allv > 0]
    if allv.size == 0:
        body.append(f'<text x="{ml}" y="{mt + ph / 2}">no data</text>')
        return _doc(width, height, body)
    tr = np.log10 if log_x else (lambda a: a)
    lo, hi = float(tr(allv.min())), float(tr(allv.max()))
    if hi - lo < 1e-9:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts = []
    for v in vals:
        v = v[np.isfinite(v)]
        if log_x:
            v = v[v > 0]
        counts.append(np.histogram(tr(v), edges)[0] if v.size else np.zeros(bins, int))
    cmax = max(1, max(int(c.max()) for c in counts))

    def sx(z):
        return ml + (z - lo) / (hi - lo) * pw

    def sy(c):
        return mt + ph - c / cmax * ph

    body.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for k, (name, c) in enumerate(zip(groups, counts)):
        col = PALETTE[k % len(PALETTE)]
        pts = [f"{_f(sx(edges[0]))},{_f(sy(0))}"]
        for b in range(bins):
            pts.append(f"{_f(sx(edges[b]))},{_f(sy(c[b]))}")
            pts.append(f"{_f(sx(edges[b + 1]))},{_f(sy(c[b]))}")
        pts.append(f"{_f(sx(edges[-1]))},{_f(sy(0))}")
        body.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        ly = mt + 14 * k + 10
        body.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" stroke="{col}" stroke-width="2"/>')
        body.append(f'<text x="{ml + pw + 35}" y="{ly + 4}">{_esc(name)}</text>')
    for z in np.linspace(lo, hi, 5):
        label = f"{10 ** z:.0f}" if log_x else f"{z:.3g}"
        body.append(f'<text x="{_f(sx(z))}" y="{mt + ph + 15}" text-anchor="middle">{label}</text>')
    body.append(f'<text x="{ml + pw / 2}" y="{height - 8}" text-anchor="middle">{_esc(xlabel)}</text>')
    body.append(f'<text x="{ml - 6}" y="{mt + 4}" text-anchor="end">{cmax}</text>')
    body.append(f'<text x="{ml - 6}" y="{mt + ph}" text-anchor="end">0</text>')
    return _doc(width, height, body)


def trajectories(t: np.ndarray, pos: np.ndarray, final: np.ndarray | None = None, title: str = "") -> str:
    """x-y paths of every agent; open circles at the start, filled at the end."""
    size, margin = 480, 30
    pts = pos.reshape(-1, 2)
    if final is not None:
        pts = np.vstack([pts, final])
    xmin, ymin = pts.min(axis=0) - 0.5
    xmax, ymax = pts.max(axis=0) + 0.5
    span = max(xmax - xmin, ymax - ymin)
    scale = (size - 2 * margin) / span

    def sx(x):
        return margin + (x - xmin) * scale

    def sy(y):
        return size - margin - (y - ymin) * scale

    body = [f'<text x="{margin}" y="18">{_esc(title)}</text>']
    n = pos.shape[1] if pos.ndim == 3 else 0
    for i in range(n):
        col = PALETTE[i % len(PALETTE)]
        path = pos[:, i, :]
        if final is not None:
            path = np.vstack([path, final[i]])
        if not len(path):
            continue
        line = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in path)
        body.append(f'<polyline points="{line}" fill="none" stroke="{col}" stroke-width="1"/>')
        x0, y0 = path[0]
        x1, y1 = path[-1]
        body.append(f'<circle cx="{_f(sx(x0))}" cy="{_f(sy(y0))}" r="3" fill="none" stroke="{col}"/>')
        body.append(f'<circle cx="{_f(sx(x1))}" cy="{_f(sy(y1))}" r="4" fill="{col}"/>')
    if len(t):
        body.append(f'<text x="{size - margin}" y="18" text-anchor="end">t = {t[-1]:.1f} s</text>')
    bar = 1.0 * scale
    body.append(f'<line x1="{margin}" y1="{size - 10}" x2="{_f(margin + bar)}" y2="{size - 10}" stroke="black"/>')
    body.append(f'<text x="{_f(margin + bar + 4)}" y="{size - 6}">1 m</text>')
    return _doc(size, size, body)


"""Minimal deterministic SVG emitter for front snapshots.

Index-0 sections render as solid strokes, index-1 as dashed; the minimax
selection is highlighted; cusps get filled glyphs and double points open
markers. All coordinates are printed with fixed precision so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import numpy as np

_COLORS = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"]


def _fmt(x):
    return f"{x:.4f}"


class _Mapper:
    def __init__(self, q, z, width, height, pad=30.0):
        self.qmin, self.qmax = float(np.min(q)), float(np.max(q))
        self.zmin, self.zmax = float(np.min(z)), float(np.max(z))
        self.width, self.height, self.pad = width, height, pad

    def __call__(self, q, z):
        wq = (self.qmax - self.qmin) or 1.0
        wz = (self.zmax - self.zmin) or 1.0
        x = self.pad + (q - self.qmin) / wq * (self.width - 2 * self.pad)
        y = self.height - self.pad - (z - self.zmin) / wz * (self.height - 2 * self.pad)
        return x, y


def render_front(analysis, minimax_pieces=None, width=800, height=500) -> str:
    f = analysis.front
    m = _Mapper(f.q, f.z, width, height)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<!-- front at t={f.time:.6g} -->',
    ]
    for s in analysis.sections:
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}"
                       for x, y in (m(f.q[v], f.z[v]) for v in range(s.start, s.end + 1)))
        dash = ' stroke-dasharray="6,4"' if s.index % 2 else ""
        color = _COLORS[s.index % len(_COLORS)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"{dash}/>')
    if minimax_pieces:
        for sec_id, qlo, qhi in minimax_pieces:
            s = next(s for s in analysis.sections if s.id == sec_id)
            vs = [v for v in range(s.start, s.end + 1) if qlo - 1e-12 <= f.q[v] <= qhi + 1e-12]
            if len(vs) < 2:
                continue
            pts = " ".join(f"{_fmt(x)},{_fmt(y)}"
                           for x, y in (m(f.q[v], f.z[v]) for v in vs))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="#d62728" '
                         f'stroke-width="3" stroke-opacity="0.7"/>')
    for c in analysis.cusps:
        x, y = m(c.q, c.z)
        fill = "#d62728" if c.sign > 0 else "#1f77b4"
        parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" fill="{fill}"/>')
    for d in analysis.doubles:
        x, y = m(d.q, d.z)
        stroke = "#000000" if d.homogeneous else "#888888"
        parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="5" fill="none" '
                     f'stroke="{stroke}" stroke-width="1.5"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

"""Deterministic SVG output: hotspot maps and the RFF approximation curve."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .geometry import GridSpec, StudyRegion, cell_polygon
from .metrics import Selection, top_k

TP, FN, FP = "#2ca02c", "#d62728", "#1f77b4"
EMPTY = "#f2f2f2"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def classify_cells(selection: Selection, truth_counts=None, active=None) -> dict[int, str]:
    """Colour per flat id: TP green, FN red, FP blue; selection-only blue when no truth.

    The true hotspots are the top-k cells by actual count, with the same k
    and tie rule as the forecast.
    """
    chosen = set(selection.chosen)
    if truth_counts is None:
        return {c: FP for c in chosen}
    truth = set(int(c) for c in top_k(truth_counts, selection.k, active))
    colours = {}
    for c in chosen | truth:
        if c in chosen and c in truth:
            colours[c] = TP
        elif c in truth:
            colours[c] = FN
        else:
            colours[c] = FP
    return colours


def hotspot_map_svg(grid: GridSpec, region: StudyRegion, selection: Selection,
                    truth_counts=None, active=None, width_px: int = 600, title: str = "") -> str:
    pad = 10.0
    scale = (width_px - 2 * pad) / max(region.width, region.height)
    h_px = region.height * scale + 2 * pad

    def xy(x, y):
        return pad + (x - region.min_x) * scale, h_px - pad - (y - region.min_y) * scale

    colours = classify_cells(selection, truth_counts, active)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{_fmt(h_px)}" '
           f'viewBox="0 0 {width_px} {_fmt(h_px)}">']
    if title:
        out.append(f"<title>{escape(title)}</title>")
    x0, y0 = xy(region.min_x, region.max_y)
    out.append(f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(region.width * scale)}" '
               f'height="{_fmt(region.height * scale)}" fill="{EMPTY}" stroke="#000"/>')
    for fid in sorted(colours):
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (xy(*p) for p in cell_polygon(grid, grid.from_flat(fid))))
        out.append(f'<polygon points="{pts}" fill="{colours[fid]}" stroke="#333" stroke-width="0.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def rff_curve_svg(rows, width_px: int = 480, height_px: int = 320) -> str:
    """Log-log plot of mean absolute kernel error against feature count.

    ``rows`` is the ``[(d, mean_err, max_err), ...]`` list from the
    approximation report.
    """
    d = np.array([r[0] for r in rows], float)
    e = np.maximum(np.array([r[1] for r in rows], float), 1e-12)
    lx, ly = np.log10(d), np.log10(e)
    pad = 40.0
    xr = (lx.min(), lx.max() if lx.max() > lx.min() else lx.min() + 1)
    yr = (math.floor(ly.min()), math.ceil(ly.max()) if math.ceil(ly.max()) > math.floor(ly.min()) else math.floor(ly.min()) + 1)

    def px(a, b):
        x = pad + (a - xr[0]) / (xr[1] - xr[0]) * (width_px - 2 * pad)
        y = height_px - pad - (b - yr[0]) / (yr[1] - yr[0]) * (height_px - 2 * pad)
        return x, y

    pts = [px(a, b) for a, b in zip(lx, ly)]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{height_px}" '
           f'viewBox="0 0 {width_px} {height_px}">',
           "<title>Kernel approximation error vs number of features</title>",
           f'<line x1="{pad}" y1="{height_px - pad}" x2="{width_px - pad}" y2="{height_px - pad}" stroke="#000"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height_px - pad}" stroke="#000"/>',
           '<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="'
           + " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts) + '"/>']
    for (x, y), dv, ev in zip(pts, d, e):
        out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="#1f77b4"/>')
        out.append(f'<text x="{_fmt(x)}" y="{_fmt(height_px - pad + 15)}" font-size="10" '
                   f'text-anchor="middle">{int(dv)}</text>')
    out.append(f'<text x="{width_px / 2}" y="{height_px - 5}" font-size="11" text-anchor="middle">d</text>')
    out.append(f'<text x="5" y="{pad - 10}" font-size="11">mean |error| (log10 {yr[0]}..{yr[1]})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

"""Minimal self-contained SVG line plots; the plotted data travel in a comment."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _fmt(v: float) -> str:
    return repr(float(v))


def line_plot(series: dict, title: str, xlabel: str, ylabel: str, logx: bool = False,
              logy: bool = False, width: int = 480, height: int = 320) -> str:
    """``series`` maps a label to ``(xs, ys)``; non-finite or non-positive-on-log points are dropped."""
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    clean = {}
    for name, (xs, ys) in series.items():
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if x is not None and y is not None and math.isfinite(x) and math.isfinite(y)
               and (not logx or x > 0) and (not logy or y > 0)]
        clean[name] = pts
    allp = [(tx(x), ty(y)) for pts in clean.values() for x, y in pts]
    if allp:
        x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
        y0, y1 = min(p[1] for p in allp), max(p[1] for p in allp)
    else:
        x0 = y0 = 0.0
        x1 = y1 = 1.0
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    ml, mr, mt, mb = 60, 110, 30, 45
    pw, ph = width - ml - mr, height - mt - mb
    sx = lambda v: ml + (tx(v) - x0) / (x1 - x0) * pw
    sy = lambda v: mt + ph - (ty(v) - y0) / (y1 - y0) * ph

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           "<!-- data"]
    for name, pts in clean.items():
        out.append(f"series {name.replace('--', '-')}")
        out.extend(f"{_fmt(x)} {_fmt(y)}" for x, y in pts)
    out.append("-->")
    out.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">'
               f"{escape(title)}</text>")
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle" '
               f'font-size="11">{escape(xlabel)}{" (log)" if logx else ""}</text>')
    out.append(f'<text x="14" y="{mt + ph / 2:.1f}" text-anchor="middle" font-size="11" '
               f'transform="rotate(-90 14 {mt + ph / 2:.1f})">{escape(ylabel)}'
               f'{" (log)" if logy else ""}</text>')
    for v, anchor in ((x0, "start"), (x1, "end")):
        lab = f"1e{v:.2f}" if logx else f"{v:.3g}"
        xpos = ml if anchor == "start" else ml + pw
        out.append(f'<text x="{xpos}" y="{mt + ph + 14}" text-anchor="{anchor}" '
                   f'font-size="9">{lab}</text>')
    for v, ypos in ((y0, mt + ph), (y1, mt + 9)):
        lab = f"1e{v:.2f}" if logy else f"{v:.3g}"
        out.append(f'<text x="{ml - 4}" y="{ypos}" text-anchor="end" font-size="9">{lab}</text>')
    for i, (name, pts) in enumerate(clean.items()):
        c = _COLORS[i % len(_COLORS)]
        if pts:
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{c}" stroke-width="1.5"/>')
            for x, y in pts:
                out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{c}"/>')
        out.append(f'<text x="{ml + pw + 8}" y="{mt + 12 + 14 * i}" font-size="10" '
                   f'fill="{c}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def read_embedded_data(svg: str) -> dict:
    """Inverse of the data comment written by :func:`line_plot`."""
    start = svg.index("<!-- data") + len("<!-- data")
    block = svg[start:svg.index("-->", start)]
    data, cur = {}, None
    for line in block.strip().splitlines():
        if line.startswith("series "):
            cur = line[len("series "):]
            data[cur] = []
        elif line.strip():
            x, y = line.split()
            data[cur].append((float(x), float(y)))
    return data

"""Figures for experiment sweeps.

``svg_chart`` writes SVG by hand with every number printed to 6 significant
digits, so identical input gives identical bytes. ``png_chart`` renders the
same series with matplotlib for quick viewing.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from typing import Optional
from xml.sax.saxutils import escape

from .errors import DataError, UsageError

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 30, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _g(v: float) -> str:
    return format(v, ".6g")


def collect_series(rows, metrics: Optional[list] = None) -> "OrderedDict[str, list]":
    """Group result rows (N > 0 only) into ``metric -> [(N, value, lo, hi)]``."""
    rows = [r for r in rows if r.N > 0]
    if not rows:
        raise DataError("no plottable rows")
    series = OrderedDict()
    for r in sorted(rows, key=lambda r: (r.metric, r.N)):
        series.setdefault(r.metric, []).append((r.N, r.value, r.ci_lo, r.ci_hi))
    if metrics:
        unknown = [m for m in metrics if m not in series]
        if unknown:
            raise UsageError(f"unknown metric {unknown[0]!r}; available: {', '.join(series)}")
        series = OrderedDict((m, series[m]) for m in metrics)
    return series


def default_ylabel(series) -> str:
    if len(series) == 1:
        name = next(iter(series))
        return (name[5:] if name.startswith("mean_") else name).replace("_", " ")
    return "value"


def _transform(series, logx: bool, logy: bool):
    out = OrderedDict()
    for name, pts in series.items():
        tp = []
        for n, v, lo, hi in pts:
            if logx and n <= 0:
                continue
            if logy and v <= 0:
                continue
            x = math.log10(n) if logx else float(n)
            if logy:
                lo = math.log10(lo) if lo > 0 else math.log10(v)
                hi = math.log10(hi) if hi > 0 else math.log10(v)
                v = math.log10(v)
            tp.append((x, v, lo, hi))
        if tp:
            out[name] = tp
    if not out:
        raise DataError("nothing left to plot after the log transform")
    return out


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def svg_chart(series, title: str = "", logx: bool = False, loglog: bool = False,
              xlabel: Optional[str] = None, ylabel: Optional[str] = None) -> str:
    logx = logx or loglog
    ylabel = ylabel or default_ylabel(series)
    xlabel = xlabel or "N"
    if logx:
        xlabel = f"log10 {xlabel}"
    if loglog:
        ylabel = f"log10 {ylabel}"
    data = _transform(series, logx, loglog)
    xs = [p[0] for pts in data.values() for p in pts]
    ys = [y for pts in data.values() for p in pts for y in p[1:]]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        pad = abs(y0) * 0.1 or 0.5
        y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{_g(LEFT + pw / 2)}" y="18" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{_g(sx(t))}" y1="{TOP + ph}" x2="{_g(sx(t))}" y2="{TOP + ph + 5}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{_g(sx(t))}" y="{TOP + ph + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{_g(t)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{LEFT - 5}" y1="{_g(sy(t))}" x2="{LEFT}" y2="{_g(sy(t))}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_g(sy(t) + 4)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{_g(t)}</text>')
    out.append(f'<text x="{_g(LEFT + pw / 2)}" y="{HEIGHT - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{_g(TOP + ph / 2)}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12" transform="rotate(-90 16 {_g(TOP + ph / 2)})">{escape(ylabel)}</text>')
    for i, (name, pts) in enumerate(data.items()):
        color = COLORS[i % len(COLORS)]
        band = [(sx(x), sy(hi)) for x, _, _, hi in pts] + \
               [(sx(x), sy(lo)) for x, _, lo, _ in reversed(pts)]
        out.append(f'<polygon points="{" ".join(f"{_g(a)},{_g(b)}" for a, b in band)}" '
                   f'fill="{color}" fill-opacity="0.15" stroke="none"/>')
        line = " ".join(f"{_g(sx(x))},{_g(sy(v))}" for x, v, _, _ in pts)
        out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="2">'
                   f'<title>{escape(name)}</title></polyline>')
        ly = TOP + 14 + 18 * i
        out.append(f'<line x1="{WIDTH - RIGHT + 10}" y1="{ly}" x2="{WIDTH - RIGHT + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - RIGHT + 35}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def png_chart(series, path, title: str = "", logx: bool = False, loglog: bool = False,
              xlabel: Optional[str] = None, ylabel: Optional[str] = None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ylabel = ylabel or default_ylabel(series)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for name, pts in series.items():
        n = [p[0] for p in pts]
        ax.plot(n, [p[1] for p in pts], marker="o", label=name)
        ax.fill_between(n, [p[2] for p in pts], [p[3] for p in pts], alpha=0.15)
    if logx or loglog:
        ax.set_xscale("log")
    if loglog:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel or "N")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)

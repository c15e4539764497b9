"""Minimal SVG line/scatter/histogram emitter.

Plots are static result figures: labeled axes, a legend, one ``<polyline>``
per curve. Output is deterministic text so it can be digested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    kind: str = "line"  # line | scatter | step
    dashed: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.0e}"
    return f"{v:.3g}"


class _Frame:
    def __init__(self, x0, y0, w, h, xlim, ylim, logx):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.logx = logx
        self.xlim = xlim
        self.ylim = ylim

    def px(self, x):
        lo, hi = self.xlim
        if self.logx:
            x, lo, hi = np.log10(x), math.log10(lo), math.log10(hi)
        return self.x0 + (np.asarray(x, dtype=float) - lo) / (hi - lo) * self.w

    def py(self, y):
        lo, hi = self.ylim
        return self.y0 + self.h - (np.asarray(y, dtype=float) - lo) / (hi - lo) * self.h


def _limits(values, log=False):
    v = np.concatenate([np.asarray(a, dtype=float).ravel() for a in values])
    v = v[np.isfinite(v)]
    if log:
        v = v[v > 0]
    if v.size == 0:
        return (1.0, 10.0) if log else (0.0, 1.0)
    lo, hi = float(v.min()), float(v.max())
    if log:
        return (lo, hi) if hi > lo else (lo / 2, hi * 2)
    if hi == lo:
        return lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _panel(series, x0, y0, w, h, title, xlabel, ylabel, logx, ylim=None):
    xlim = _limits([s.x for s in series], log=logx)
    if ylim is None:
        ylim = _limits([s.y for s in series])
    f = _Frame(x0, y0, w, h, xlim, ylim, logx)
    out = [f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(w)}" height="{_fmt(h)}" '
           'fill="none" stroke="#333"/>']
    if logx:
        ticks = [10.0 ** k for k in range(math.floor(math.log10(xlim[0])),
                                           math.ceil(math.log10(xlim[1])) + 1)
                 if xlim[0] <= 10.0 ** k <= xlim[1]]
    else:
        ticks = list(np.linspace(xlim[0], xlim[1], 5))
    for t in ticks:
        px = float(f.px(t))
        out.append(f'<line x1="{_fmt(px)}" y1="{_fmt(y0 + h)}" x2="{_fmt(px)}" '
                   f'y2="{_fmt(y0 + h + 4)}" stroke="#333"/>')
        out.append(f'<text x="{_fmt(px)}" y="{_fmt(y0 + h + 16)}" font-size="10" '
                   f'text-anchor="middle">{_tick_label(t)}</text>')
    for t in np.linspace(ylim[0], ylim[1], 5):
        py = float(f.py(t))
        out.append(f'<line x1="{_fmt(x0 - 4)}" y1="{_fmt(py)}" x2="{_fmt(x0)}" '
                   f'y2="{_fmt(py)}" stroke="#333"/>')
        out.append(f'<text x="{_fmt(x0 - 6)}" y="{_fmt(py + 3)}" font-size="10" '
                   f'text-anchor="end">{_tick_label(t)}</text>')
    out.append(f'<text x="{_fmt(x0 + w / 2)}" y="{_fmt(y0 + h + 32)}" font-size="12" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="{_fmt(x0 - 44)}" y="{_fmt(y0 + h / 2)}" font-size="12" '
               f'text-anchor="middle" transform="rotate(-90 {_fmt(x0 - 44)} '
               f'{_fmt(y0 + h / 2)})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{_fmt(x0 + w / 2)}" y="{_fmt(y0 - 8)}" font-size="13" '
                   f'text-anchor="middle">{escape(title)}</text>')

    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        x = np.asarray(s.x, dtype=float)
        y = np.asarray(s.y, dtype=float)
        if s.kind == "step":
            # x are bin edges, y are bin heights
            x, y = np.repeat(x, 2)[1:-1], np.repeat(y, 2)
        y = np.clip(y, ylim[0], ylim[1])
        keep = np.isfinite(x) & np.isfinite(y) & ((x > 0) if logx else True)
        x, y = x[keep], y[keep]
        if s.kind == "scatter":
            for a, b in zip(f.px(x), f.py(y)):
                out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="2" fill="{color}" '
                           'fill-opacity="0.5"/>')
            continue
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(f.px(x), f.py(y)))
        dash = ' stroke-dasharray="6,3"' if s.dashed else ""
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} '
                   f'points="{pts}"><title>{escape(s.label)}</title></polyline>')
    # legend
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        ly = y0 + 12 + 14 * i
        out.append(f'<rect x="{_fmt(x0 + w - 150)}" y="{_fmt(ly - 8)}" width="10" height="10" '
                   f'fill="{color}"/>')
        out.append(f'<text x="{_fmt(x0 + w - 135)}" y="{_fmt(ly + 1)}" font-size="10">'
                   f'{escape(s.label)}</text>')
    return out


def _document(width, height, body) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>',
                      *body, "</svg>", ""])


def line_plot(series, xlabel="", ylabel="", title="", logx=False, ylim=None) -> str:
    body = _panel(series, 70, 30, 520, 320, title, xlabel, ylabel, logx, ylim)
    return _document(640, 400, body)


def panel_plot(panels, xlabel="", ylabel="") -> str:
    """Side-by-side panels; ``panels`` is a list of ``(title, [Series])``."""
    w, gap = 300, 80
    body = []
    for k, (title, series) in enumerate(panels):
        body += _panel(series, 70 + k * (w + gap), 30, w, 260, title, xlabel, ylabel, False)
    return _document(70 + len(panels) * (w + gap), 340, body)

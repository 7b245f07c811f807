"""Deterministic log-log SVG plots of spectra with power-law reference lines."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .model import ONE_BODY_EXPONENT

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b")
_REF_STYLES = ("6,3", "2,3")
MAX_DECADES = 16


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def reference_lines(cfg, anchor: float) -> list:
    """Reference slopes ``-alpha_K`` and ``-8/3`` through ``(1, anchor)``."""
    return [
        (f"n^-alpha_K (alpha_K={cfg.alpha_K:.4g})", cfg.alpha_K, anchor),
        ("n^-8/3", ONE_BODY_EXPONENT, anchor),
    ]


def loglog_svg(series: Sequence, references: Sequence = (), title: str = "", width: int = 640,
               height: int = 440) -> str:
    """Render ``series`` of ``(label, values)`` on log-log axes.

    ``references`` holds ``(label, exponent, anchor)`` triples drawn as
    dashed lines ``anchor * n^(-exponent)``. Only positive values are
    plotted and the vertical range spans at most ``MAX_DECADES`` decades;
    output depends only on the inputs.
    """
    left, right, top, bottom = 70, 20, 40, 60
    pos = []
    for _, v in series:
        v = np.asarray(v, dtype=float)
        pos.append(v[v > 0])
    allv = np.concatenate(pos) if pos else np.zeros(0)
    n_max = max([len(np.asarray(v)) for _, v in series] + [2])
    if allv.size:
        y_hi, y_lo = math.log10(allv.max()), math.log10(allv.min())
    else:
        y_hi, y_lo = 0.0, -1.0
    y_hi, y_lo = math.ceil(y_hi), math.floor(y_lo)
    if y_hi == y_lo:
        y_lo -= 1
    y_lo = max(y_lo, y_hi - MAX_DECADES)
    x_hi = math.log10(n_max)
    x_hi = x_hi if x_hi > 0 else 1.0
    pw, ph = width - left - right, height - top - bottom

    def X(lx):
        return left + pw * lx / x_hi

    def Y(ly):
        return top + ph * (y_hi - ly) / (y_hi - y_lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width // 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for e in range(int(y_lo), int(y_hi) + 1):
        y = _fmt(Y(e))
        out.append(f'<line x1="{left}" y1="{y}" x2="{left + pw}" y2="{y}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{y}" text-anchor="end" font-family="sans-serif" font-size="11">1e{e}</text>')
    for e in range(0, int(math.floor(x_hi)) + 1):
        x = _fmt(X(e))
        out.append(f'<line x1="{x}" y1="{top}" x2="{x}" y2="{top + ph}" stroke="#dddddd"/>')
        out.append(f'<text x="{x}" y="{top + ph + 16}" text-anchor="middle" font-family="sans-serif" font-size="11">{10 ** e}</text>')
    out.append(f'<text x="{left + pw // 2}" y="{height - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">n</text>')
    out.append('<clipPath id="plot"><rect x="%d" y="%d" width="%d" height="%d"/></clipPath>' % (left, top, pw, ph))

    legend = []
    for i, (label, slope, anchor) in enumerate(references):
        if not anchor > 0:
            continue
        ly0 = math.log10(anchor)
        ly1 = ly0 - slope * x_hi
        out.append(
            f'<line class="reference" data-slope="-{slope:.6g}" x1="{_fmt(X(0))}" y1="{_fmt(Y(ly0))}" '
            f'x2="{_fmt(X(x_hi))}" y2="{_fmt(Y(ly1))}" stroke="gray" stroke-dasharray="{_REF_STYLES[i % 2]}" '
            f'clip-path="url(#plot)"/>'
        )
        legend.append((label, "gray", _REF_STYLES[i % 2]))
    for i, (label, v) in enumerate(series):
        v = np.asarray(v, dtype=float)
        n = np.arange(1, len(v) + 1)
        keep = v >= 10.0**y_lo
        pts = " ".join(f"{_fmt(X(math.log10(k)))},{_fmt(Y(math.log10(val)))}" for k, val in zip(n[keep], v[keep]))
        color = _COLORS[i % len(_COLORS)]
        out.append(f'<polyline class="series" points="{pts}" fill="none" stroke="{color}" stroke-width="1.5" clip-path="url(#plot)"/>')
        legend.append((label, color, None))
    for i, (label, color, dash) in enumerate(legend):
        y = top + 14 + 16 * i
        x = left + pw - 230
        style = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 24}" y2="{y - 4}" stroke="{color}"{style}/>')
        out.append(f'<text x="{x + 30}" y="{y}" font-family="sans-serif" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def spectrum_svg(series: Sequence, cfg, title: str = "") -> str:
    """Plot ``series`` with the ``-alpha_K`` and ``-8/3`` reference lines for ``cfg``."""
    firsts = [float(np.asarray(v)[0]) for _, v in series if len(v) and np.asarray(v)[0] > 0]
    anchor = max(firsts) if firsts else 1.0
    return loglog_svg(series, reference_lines(cfg, anchor), title)

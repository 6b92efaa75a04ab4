"""Minimal deterministic SVG plotting.

Hand-rolled rather than delegated to a plotting library so that identical
inputs produce byte-identical, self-contained files: no timestamps, no
randomized element ids, no external assets.
"""

from __future__ import annotations

import math
from typing import Sequence

__all__ = ["emit_plot", "render_svg"]

Series = tuple[str, Sequence[float], Sequence[float]]

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 72, 24, 36, 56
_PALETTE = ["#1f6fb2", "#d1495b", "#2e8b57", "#8a5fbf", "#c98013", "#3b3b3b"]


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return [0.0, 1.0]
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            stride = mult * mag
            break
    first = math.ceil(lo / stride) * stride
    ticks = []
    v = first
    while v <= hi + stride * 1e-9:
        ticks.append(0.0 if abs(v) < stride * 1e-9 else v)
        v += stride
    return ticks or [lo, hi]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def render_svg(
    series: Sequence[Series],
    kind: str = "line",
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    """Render labelled series to an SVG document string.

    ``kind == "line"``: every series is (label, xs, ys) with equal lengths.
    ``kind == "histogram"``: the first series is (label, bin_edges, densities)
    with len(edges) == len(densities) + 1, drawn as bars; any further series
    are overlaid as lines.
    """
    if not series:
        raise ValueError("series must be nonempty")
    if kind not in ("line", "histogram"):
        raise ValueError(f"unknown plot kind {kind!r}")

    def series_bounds(s: Series, as_bars: bool) -> tuple[float, float, float, float]:
        _, xs, ys = s
        if as_bars:
            if len(xs) != len(ys) + 1:
                raise ValueError("histogram series needs len(edges) == len(values) + 1")
            return min(xs), max(xs), min(0.0, min(ys)), max(ys)
        if len(xs) != len(ys) or not xs:
            raise ValueError("line series needs equal, nonzero lengths")
        return min(xs), max(xs), min(ys), max(ys)

    bounds = [series_bounds(s, kind == "histogram" and i == 0) for i, s in enumerate(series)]
    x_lo = min(b[0] for b in bounds)
    x_hi = max(b[1] for b in bounds)
    y_lo = min(b[2] for b in bounds)
    y_hi = max(b[3] for b in bounds)
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    def px(x: float) -> float:
        return _ML + (x - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def py(y: float) -> float:
        return _H - _MB - (y - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="#ffffff"/>',
    ]
    if title:
        out.append(
            f'<text x="{_W // 2}" y="22" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{title}</text>'
        )
    # axes and ticks
    for tick in _nice_ticks(x_lo, x_hi):
        x = px(tick)
        out.append(
            f'<line x1="{x:.2f}" y1="{_H - _MB}" x2="{x:.2f}" y2="{_H - _MB + 5}" stroke="#333"/>'
        )
        out.append(
            f'<text x="{x:.2f}" y="{_H - _MB + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt(tick)}</text>'
        )
    for tick in _nice_ticks(y_lo, y_hi):
        y = py(tick)
        out.append(
            f'<line x1="{_ML - 5}" y1="{y:.2f}" x2="{_ML}" y2="{y:.2f}" stroke="#333"/>'
        )
        out.append(
            f'<text x="{_ML - 9}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(tick)}</text>'
        )
    out.append(
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" '
        'fill="none" stroke="#333"/>'
    )
    if xlabel:
        out.append(
            f'<text x="{(_ML + _W - _MR) // 2}" y="{_H - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{xlabel}</text>'
        )
    if ylabel:
        out.append(
            f'<text x="16" y="{(_MT + _H - _MB) // 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13" '
            f'transform="rotate(-90 16 {(_MT + _H - _MB) // 2})">{ylabel}</text>'
        )

    for i, (label, xs, ys) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        if kind == "histogram" and i == 0:
            zero = py(max(0.0, y_lo))
            for j, v in enumerate(ys):
                x0, x1 = px(xs[j]), px(xs[j + 1])
                top = py(v)
                out.append(
                    f'<rect x="{x0:.2f}" y="{min(top, zero):.2f}" '
                    f'width="{max(x1 - x0, 0.0):.2f}" height="{abs(zero - top):.2f}" '
                    f'fill="{color}" fill-opacity="0.55"/>'
                )
        else:
            pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
            out.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"/>'
            )
        ly = _MT + 16 + 16 * i
        out.append(
            f'<rect x="{_W - _MR - 150}" y="{ly - 9}" width="10" height="10" fill="{color}"/>'
        )
        out.append(
            f'<text x="{_W - _MR - 136}" y="{ly}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(
    series: Sequence[Series],
    kind: str,
    path,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> None:
    """Write a self-contained, byte-stable SVG for the given series."""
    svg = render_svg(series, kind, title=title, xlabel=xlabel, ylabel=ylabel)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)

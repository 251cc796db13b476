"""Minimal hand-rolled SVG renderings (line charts and histograms).

Static figures only; no plotting dependency.  Numbers are formatted with
repr so identical inputs serialize to identical bytes.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

WIDTH, HEIGHT = 640, 420
MARGIN = 56
PALETTE = ("#c23b22", "#1f5fa8", "#3a7d44", "#8a5fbf", "#b8860b")


def _scale(values: Sequence[float]) -> Tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        pad = 1.0 if hi == 0 else abs(hi) * 0.1
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _fmt(x: float) -> str:
    return repr(round(float(x), 6))


class SvgCanvas:
    def __init__(self, title: str) -> None:
        self.parts: List[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" '
            f'font-family="monospace" font-size="14">{title}</text>',
        ]

    def axes(self, xlab: str, ylab: str) -> None:
        x0, y0, x1, y1 = MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN
        self.parts.append(
            f'<path d="M {x0} {y1} L {x0} {y0} L {x1} {y0}" stroke="black" fill="none"/>'
        )
        self.parts.append(
            f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
            f'font-family="monospace" font-size="12">{xlab}</text>'
        )
        self.parts.append(
            f'<text x="16" y="{(y0 + y1) // 2}" text-anchor="middle" '
            f'font-family="monospace" font-size="12" '
            f'transform="rotate(-90 16 {(y0 + y1) // 2})">{ylab}</text>'
        )

    def finish(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _to_px(x, y, xr, yr):
    x0, y0 = MARGIN, HEIGHT - MARGIN
    w, h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN
    px = x0 + (x - xr[0]) / (xr[1] - xr[0]) * w
    py = y0 - (y - yr[0]) / (yr[1] - yr[0]) * h
    return px, py


def line_plot(
    title: str,
    xlab: str,
    ylab: str,
    series: Sequence[Tuple[str, Sequence[float], Sequence[float]]],
    footnote: Optional[str] = None,
) -> str:
    """Polyline chart; `series` holds (label, xs, ys) triples."""
    canvas = SvgCanvas(title)
    canvas.axes(xlab, ylab)
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    xr, yr = _scale(all_x), _scale(all_y)
    for idx, (label, xs, ys) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(
            f"{_fmt(px)},{_fmt(py)}" for px, py in (_to_px(x, y, xr, yr) for x, y in zip(xs, ys))
        )
        canvas.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        canvas.parts.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 16 * idx}" font-family="monospace" '
            f'font-size="11" fill="{color}" text-anchor="end">{label}</text>'
        )
    for frac, val in ((0.0, xr[0]), (1.0, xr[1])):
        px, _ = _to_px(val, yr[0], xr, yr)
        canvas.parts.append(
            f'<text x="{_fmt(px)}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" '
            f'font-family="monospace" font-size="10">{_fmt(val)}</text>'
        )
    for val in (yr[0], yr[1]):
        _, py = _to_px(xr[0], val, xr, yr)
        canvas.parts.append(
            f'<text x="{MARGIN - 6}" y="{_fmt(py)}" text-anchor="end" '
            f'font-family="monospace" font-size="10">{_fmt(val)}</text>'
        )
    if footnote:
        canvas.parts.append(
            f'<text x="{MARGIN}" y="{HEIGHT - 2}" font-family="monospace" '
            f'font-size="9" fill="#555">{footnote}</text>'
        )
    return canvas.finish()


def histogram_plot(
    title: str,
    xlab: str,
    series: Sequence[Tuple[str, Sequence[float], Sequence[float]]],
    log_y: bool = False,
    footnote: Optional[str] = None,
) -> str:
    """Binned densities drawn as step lines; `series` holds (label, edges, counts)."""
    import math

    plots = []
    for label, edges, counts in series:
        xs: List[float] = []
        ys: List[float] = []
        for i, c in enumerate(counts):
            y = math.log10(c) if (log_y and c > 0) else (float("nan") if log_y else c)
            if log_y and c <= 0:
                continue
            xs.extend([edges[i], edges[i + 1]])
            ys.extend([y, y])
        plots.append((label, xs, ys))
    ylab = "log10 density" if log_y else "density"
    return line_plot(title, xlab, ylab, plots, footnote=footnote)

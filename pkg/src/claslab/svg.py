"""Tiny deterministic SVG writer: axes, points, lines, bars, grids, text."""

from __future__ import annotations

from html import escape
from pathlib import Path
from typing import Sequence

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")
W, H, PAD = 480, 360, 48


def _f(v: float) -> str:
    return f"{v:.2f}"


class Canvas:
    def __init__(self, title: str, width: int = W, height: int = H):
        self.width, self.height = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        ]

    def text(self, x, y, s, anchor="start", size=None):
        extra = f' font-size="{size}"' if size else ""
        self.parts.append(f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}"{extra}>{escape(str(s))}</text>')

    def line(self, x1, y1, x2, y2, color="black", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" stroke="{color}" stroke-width="{width}"{d}/>'
        )

    def circle(self, x, y, r, color, marker="o"):
        if marker == "*":
            self.parts.append(
                f'<text x="{_f(x)}" y="{_f(y + 4)}" text-anchor="middle" fill="{color}" font-size="14">&#9733;</text>'
            )
        else:
            self.parts.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{r}" fill="{color}" fill-opacity="0.7"/>')

    def rect(self, x, y, w, h, color, stroke="none"):
        self.parts.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" fill="{color}" stroke="{stroke}"/>')

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.parts + ["</svg>"]) + "\n", encoding="utf-8")


class _Axes:
    def __init__(self, canvas: Canvas, xs: Sequence[float], ys: Sequence[float], xlabel: str, ylabel: str):
        self.c = canvas
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x1 == x0:
            x0, x1 = x0 - 1, x1 + 1
        if y1 == y0:
            y0, y1 = y0 - 1, y1 + 1
        mx, my = (x1 - x0) * 0.05, (y1 - y0) * 0.05
        self.x0, self.x1, self.y0, self.y1 = x0 - mx, x1 + mx, y0 - my, y1 + my
        left, bottom = PAD, canvas.height - PAD
        canvas.line(left, bottom, canvas.width - 16, bottom)
        canvas.line(left, bottom, left, 28)
        canvas.text((left + canvas.width - 16) / 2, canvas.height - 10, xlabel, "middle")
        canvas.text(12, 24, ylabel)
        for frac in (0.0, 0.5, 1.0):
            xv = self.x0 + frac * (self.x1 - self.x0)
            yv = self.y0 + frac * (self.y1 - self.y0)
            canvas.text(self.px(xv), bottom + 14, f"{xv:.3g}", "middle", 9)
            canvas.text(left - 4, self.py(yv) + 3, f"{yv:.3g}", "end", 9)

    def px(self, x: float) -> float:
        return PAD + (x - self.x0) / (self.x1 - self.x0) * (self.c.width - 16 - PAD)

    def py(self, y: float) -> float:
        return (self.c.height - PAD) - (y - self.y0) / (self.y1 - self.y0) * (self.c.height - PAD - 28)


def scatter(
    path: str | Path,
    groups: dict[str, Sequence[tuple[float, float]]],
    title: str,
    xlabel: str = "",
    ylabel: str = "",
    fit: tuple[float, float] | None = None,
    star: str | None = None,
) -> None:
    """Scatter plot of named point groups; ``fit`` = (slope, intercept) draws a line."""
    c = Canvas(title)
    xs = [p[0] for pts in groups.values() for p in pts]
    ys = [p[1] for pts in groups.values() for p in pts]
    ax = _Axes(c, xs or [0.0], ys or [0.0], xlabel, ylabel)
    if fit is not None:
        slope, icept = fit
        c.line(ax.px(ax.x0), ax.py(slope * ax.x0 + icept), ax.px(ax.x1), ax.py(slope * ax.x1 + icept), "#555", 1.2, "4,3")
    for i, (name, pts) in enumerate(groups.items()):
        color = PALETTE[i % len(PALETTE)]
        for x, y in pts:
            c.circle(ax.px(x), ax.py(y), 3, color, "*" if name == star else "o")
        c.text(c.width - 90, 40 + 14 * i, name, size=10)
        c.circle(c.width - 98, 36 + 14 * i, 3, color)
    c.save(path)


def bars(path: str | Path, categories: Sequence[str], series: dict[str, Sequence[float]], title: str, ylabel: str = "") -> None:
    """Grouped vertical bars, one group per category."""
    c = Canvas(title)
    values = [v for vs in series.values() for v in vs] + [0.0]
    ax = _Axes(c, [0, len(categories)], values, "", ylabel)
    group_w = (ax.px(len(categories)) - ax.px(0)) / max(len(categories), 1)
    bar_w = group_w * 0.8 / max(len(series), 1)
    zero = ax.py(0.0)
    for gi, cat in enumerate(categories):
        gx = ax.px(gi) + group_w * 0.1
        for si, (name, vs) in enumerate(series.items()):
            y = ax.py(vs[gi])
            c.rect(gx + si * bar_w, min(y, zero), bar_w, abs(zero - y), PALETTE[si % len(PALETTE)])
        c.text(gx + group_w * 0.4, c.height - PAD + 26, cat, "middle", 10)
    for si, name in enumerate(series):
        c.rect(c.width - 100, 32 + 14 * si, 8, 8, PALETTE[si % len(PALETTE)])
        c.text(c.width - 88, 40 + 14 * si, name, size=10)
    c.save(path)


def stacked_bars(path: str | Path, rows: Sequence[Sequence[float]], names: Sequence[str], title: str,
                 highlight: Sequence[int] = ()) -> None:
    """One stacked bar per row (e.g. per layer) of fractions summing to 1."""
    c = Canvas(title, width=max(W, 24 + 14 * len(rows) + PAD))
    left, bottom, top = PAD, c.height - PAD, 40
    bw = (c.width - left - 110) / max(len(rows), 1)
    for li in highlight:
        c.rect(left + li * bw, top - 6, bw, bottom - top + 6, "#e8def8")
    for li, row in enumerate(rows):
        y = bottom
        for ci, frac in enumerate(row):
            h = frac * (bottom - top)
            c.rect(left + li * bw + 1, y - h, bw - 2, h, PALETTE[ci % len(PALETTE)])
            y -= h
        if li % max(1, len(rows) // 8) == 0:
            c.text(left + (li + 0.5) * bw, bottom + 14, li, "middle", 9)
    c.text((left + c.width - 110) / 2, c.height - 10, "layer", "middle")
    for ci, name in enumerate(names):
        c.rect(c.width - 104, 40 + 14 * ci, 8, 8, PALETTE[ci % len(PALETTE)])
        c.text(c.width - 92, 48 + 14 * ci, name, size=10)
    c.save(path)


def grid(path: str | Path, row_names: Sequence[str], col_names: Sequence[str], values: Sequence[Sequence[float]],
         title: str) -> None:
    """Heatmap-style grid with the value printed in each cell (blue < 0 < red)."""
    cell_w, cell_h = 90, 24
    c = Canvas(title, width=120 + cell_w * len(col_names) + 20, height=60 + cell_h * len(row_names) + 20)
    flat = [abs(v) for row in values for v in row] or [1.0]
    scale = max(flat) or 1.0
    for j, name in enumerate(col_names):
        c.text(120 + cell_w * (j + 0.5), 48, name, "middle", 10)
    for i, rname in enumerate(row_names):
        y = 56 + cell_h * i
        c.text(112, y + 16, rname, "end", 10)
        for j, v in enumerate(values[i]):
            t = min(abs(v) / scale, 1.0)
            shade = int(255 - 155 * t)
            color = f"rgb(255,{shade},{shade})" if v > 0 else f"rgb({shade},{shade},255)"
            c.rect(120 + cell_w * j, y, cell_w, cell_h, color, "#999")
            c.text(120 + cell_w * (j + 0.5), y + 16, f"{v:+.4f}", "middle", 10)
    c.save(path)

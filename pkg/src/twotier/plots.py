"""Dependency-free SVG output: a heatmap and a multi-series line chart."""

from __future__ import annotations

from html import escape

# endpoints of a dark-blue -> teal -> yellow ramp
_RAMP = [(0.0, (48, 18, 110)), (0.5, (33, 145, 140)), (1.0, (253, 231, 37))]


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(_RAMP, _RAMP[1:]):
        if t <= t1:
            u = (t - t0) / (t1 - t0)
            r, g, b = (round(a + u * (b_ - a)) for a, b_ in zip(c0, c1))
            return f"rgb({r},{g},{b})"
    return "rgb(253,231,37)"


def heatmap_svg(grid, row_labels, col_labels, title="", cell_w=90, cell_h=22, label_w=320) -> str:
    """``grid[i][j]`` in [0, 1] or None (drawn grey). Colour is scaled to the observed range."""
    vals = [v for row in grid for v in row if v is not None]
    lo, hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    top = 50
    width = label_w + cell_w * len(col_labels) + 20
    height = top + cell_h * len(row_labels) + 20
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="10" y="18" font-size="14">{escape(title)}</text>',
    ]
    for j, c in enumerate(col_labels):
        x = label_w + j * cell_w + cell_w / 2
        out.append(f'<text x="{x}" y="{top - 8}" text-anchor="middle">{escape(c)}</text>')
    for i, (label, row) in enumerate(zip(row_labels, grid)):
        y = top + i * cell_h
        out.append(f'<text x="{label_w - 6}" y="{y + cell_h * 0.7}" text-anchor="end">{escape(label)}</text>')
        for j, v in enumerate(row):
            x = label_w + j * cell_w
            fill = "rgb(200,200,200)" if v is None else _color((v - lo) / span)
            out.append(f'<rect x="{x}" y="{y}" width="{cell_w}" height="{cell_h}" fill="{fill}" stroke="white"/>')
            text = "n/a" if v is None else f"{100 * v:.2f}"
            ink = "black" if v is not None and (v - lo) / span > 0.6 else "white"
            out.append(f'<text x="{x + cell_w / 2}" y="{y + cell_h * 0.7}" text-anchor="middle" '
                       f'fill="{ink}">{text}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]


def line_chart_svg(xs, series: dict, title="", y_range=(0.0, 1.0), width=520, height=300) -> str:
    """Plot each ``series[name]`` (a list of y values) against ``xs``."""
    pad_l, pad_r, pad_t, pad_b = 50, 140, 30, 35
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b
    x0, x1 = (min(xs), max(xs)) if xs else (0, 1)
    xspan = (x1 - x0) or 1
    y0, y1 = y_range
    yspan = (y1 - y0) or 1

    def px(x):
        return pad_l + (x - x0) / xspan * pw

    def py(y):
        return pad_t + (1 - (y - y0) / yspan) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{pad_l}" y="18" font-size="14">{escape(title)}</text>',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        yv = y0 + frac * yspan
        out.append(f'<text x="{pad_l - 6}" y="{py(yv) + 4}" text-anchor="end">{yv:.2f}</text>')
    out.append(f'<text x="{pad_l + pw / 2}" y="{height - 8}" text-anchor="middle">epoch</text>')
    for k, (name, ys) in enumerate(series.items()):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = pad_t + 14 * k + 10
        out.append(f'<line x1="{width - pad_r + 10}" y1="{ly}" x2="{width - pad_r + 28}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - pad_r + 32}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

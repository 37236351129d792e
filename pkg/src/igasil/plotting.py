"""Self-contained SVG learning-curve rendering.

No plotting dependency: charts are assembled as SVG text, so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

from .trainer import METRICS_COLUMNS

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
)

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 160, 28, 48


class SchemaError(ValueError):
    pass


def read_metrics_csv(path, column):
    """(x, y) series from a metrics CSV, validating the fixed schema."""
    lines = Path(path).read_text().strip().split("\n")
    header = lines[0].split(",")
    expected = METRICS_COLUMNS.split(",")
    if header != expected:
        for i, want in enumerate(expected):
            got = header[i] if i < len(header) else "<missing>"
            if got != want:
                raise SchemaError(f"{path}: column {i + 1} is {got!r}, expected {want!r}")
        raise SchemaError(f"{path}: {len(header) - len(expected)} unexpected trailing columns")
    if column not in expected:
        raise SchemaError(f"unknown metrics column {column!r}")
    ci = expected.index(column)
    xs, ys = [], []
    for line in lines[1:]:
        fields = line.split(",")
        xs.append(float(fields[0]))
        ys.append(float(fields[ci]))
    return xs, ys


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = 10 * mag
    for mult in (1, 2, 2.5, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = step * math.ceil(lo / step)
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(t)
        t += step
    return ticks


def _fmt(v):
    return format(v, ".6g")


def render_series(series, labels, x_label="episodes", y_label="return", title=None):
    """SVG chart of (xs, ys) polylines with a legend; pure text function."""
    xs_all = [x for xs, _ in series for x in xs]
    ys_all = [y for _, ys in series for y in ys]
    if xs_all:
        x_lo, x_hi = min(xs_all), max(xs_all)
        y_lo, y_hi = min(ys_all), max(ys_all)
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333333"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN_T + plot_h}" x2="{x:.2f}" '
                   f'y2="{MARGIN_T + plot_h + 4}" stroke="#333333"/>')
        out.append(f'<text x="{x:.2f}" y="{MARGIN_T + plot_h + 16}" '
                   f'text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        out.append(f'<line x1="{MARGIN_L - 4}" y1="{y:.2f}" x2="{MARGIN_L}" '
                   f'y2="{y:.2f}" stroke="#333333"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{y + 3:.2f}" '
                   f'text-anchor="end">{_fmt(t)}</text>')
        out.append(f'<line x1="{MARGIN_L}" y1="{y:.2f}" x2="{MARGIN_L + plot_w}" '
                   f'y2="{y:.2f}" stroke="#eeeeee"/>')
    out.append(f'<text x="{MARGIN_L + plot_w / 2:.2f}" y="{HEIGHT - 10}" '
               f'text-anchor="middle">{x_label}</text>')
    out.append(f'<text x="16" y="{MARGIN_T + plot_h / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN_T + plot_h / 2:.2f})">{y_label}</text>')
    if title:
        out.append(f'<text x="{MARGIN_L + plot_w / 2:.2f}" y="18" '
                   f'text-anchor="middle">{title}</text>')

    for i, ((xs, ys), label) in enumerate(zip(series, labels)):
        color = PALETTE[i % len(PALETTE)]
        if xs:
            points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
            out.append(f'<polyline points="{points}" fill="none" stroke="{color}" '
                       f'stroke-width="1.5"/>')
        ly = MARGIN_T + 14 + 16 * i
        lx = MARGIN_L + plot_w + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{lx + 24}" y="{ly}">{label}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_curves(csv_paths, column="mean_return", title=None):
    """One curve per metrics CSV; legend entries come from the file names."""
    series, labels = [], []
    for path in csv_paths:
        series.append(read_metrics_csv(path, column))
        labels.append(Path(path).parent.name or Path(path).stem)
    return render_series(series, labels, x_label="episodes", y_label=column, title=title)


def plot_to_file(csv_paths, out_path, column="mean_return", title=None):
    svg = render_curves(csv_paths, column=column, title=title)
    Path(out_path).write_text(svg)
    return out_path

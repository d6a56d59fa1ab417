"""Standalone SVG output: arc diagrams and sweep line charts.

Rendering is a pure function of its inputs: no timestamps, fixed float
formatting, insertion-ordered iteration. Identical specs produce identical
bytes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

# Strength-to-color map: clamp to [0, STRENGTH_CLAMP], then linear RGB
# interpolation. Endpoints are colorblind-safe.
ORANGE = (0xE6, 0x9F, 0x00)  # strength 0 (weak)
BLUE = (0x00, 0x72, 0xB2)  # strength 2 (strong)
STRENGTH_CLAMP = 2.0

PALETTE = ("#0072B2", "#E69F00", "#009E73", "#CC79A7", "#56B4E9", "#D55E00", "#F0E442")


def strength_color(value: float) -> str:
    """Hex stroke color for an edge strength."""
    t = min(max(value, 0.0), STRENGTH_CLAMP) / STRENGTH_CLAMP
    rgb = tuple(round(lo + (hi - lo) * t) for lo, hi in zip(ORANGE, BLUE))
    return "#{:02X}{:02X}{:02X}".format(*rgb)


@dataclass
class ArcStyle:
    token_gap: int = 70
    margin: int = 46
    font_size: int = 13
    gold_color: str = "#000000"
    stroke_width: float = 1.6
    rise_per_span: int = 16
    max_rise: int = 120


@dataclass
class ArcDiagramSpec:
    tokens: list[str]
    gold_edges: Sequence[tuple[int, int]] = ()
    predicted_edges: Sequence[tuple[int, int, float]] = ()  # (i, j, strength)
    title: str = ""
    style: ArcStyle = field(default_factory=ArcStyle)


def _arc_path(x1: float, x2: float, y: float, rise: float, above: bool) -> str:
    sweep = 1 if above else 0
    rx = abs(x2 - x1) / 2.0
    return (
        f"M {x1:.1f},{y:.1f} A {rx:.1f},{rise:.1f} 0 0 {sweep} {x2:.1f},{y:.1f}"
    )


def render_arcs(spec: ArcDiagramSpec) -> str:
    """Arc diagram: gold edges in black above the token row, predicted edges
    below, stroked by the strength color map, with a legend for the scale."""
    if not spec.tokens:
        raise ValueError("cannot render an empty token list")
    n = len(spec.tokens)
    for i, j in spec.gold_edges:
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"gold edge ({i}, {j}) outside token range 1..{n}")
    for i, j, _ in spec.predicted_edges:
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"predicted edge ({i}, {j}) outside token range 1..{n}")

    st = spec.style
    xs = [st.margin + (k - 1) * st.token_gap + st.token_gap / 2.0 for k in range(1, n + 1)]
    width = st.margin * 2 + n * st.token_gap
    mid = st.max_rise + 40
    legend_h = 56
    height = mid * 2 + legend_h

    def rise(i, j):
        return min(st.rise_per_span * abs(j - i) + 8, st.max_rise)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="#FFFFFF"/>',
    ]
    if spec.title:
        out.append(
            f'<text x="{st.margin}" y="20" font-size="{st.font_size + 1}">{escape(spec.title)}</text>'
        )
    for (i, j) in sorted(spec.gold_edges):
        out.append(
            f'<path d="{_arc_path(xs[i - 1], xs[j - 1], mid - 10, rise(i, j), True)}" '
            f'fill="none" stroke="{st.gold_color}" stroke-width="{st.stroke_width}"/>'
        )
    for (i, j, s) in sorted(spec.predicted_edges):
        out.append(
            f'<path d="{_arc_path(xs[i - 1], xs[j - 1], mid + 10, rise(i, j), False)}" '
            f'fill="none" stroke="{strength_color(s)}" stroke-width="{st.stroke_width}"/>'
        )
    for x, form in zip(xs, spec.tokens):
        out.append(
            f'<text x="{x:.1f}" y="{mid + 4}" font-size="{st.font_size}" '
            f'text-anchor="middle">{escape(form)}</text>'
        )

    # Legend: strength scale as a band of rects (never <path>, so arcs stay countable).
    band_x, band_y, band_w, band_h, steps = st.margin, height - 34, 160, 10, 16
    out.append(
        f'<text x="{band_x}" y="{band_y - 6}" font-size="11">predicted edge strength '
        f"(clamped to 0..{STRENGTH_CLAMP:g})</text>"
    )
    for k in range(steps):
        s = STRENGTH_CLAMP * (k + 0.5) / steps
        out.append(
            f'<rect x="{band_x + k * band_w / steps:.1f}" y="{band_y}" '
            f'width="{band_w / steps + 0.5:.1f}" height="{band_h}" fill="{strength_color(s)}"/>'
        )
    for frac, label in ((0.0, "0"), (0.5, "1"), (1.0, "2")):
        out.append(
            f'<text x="{band_x + frac * band_w:.1f}" y="{band_y + band_h + 12}" '
            f'font-size="10" text-anchor="middle">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_line_chart(
    series: Mapping[str, Sequence[tuple[float, float]]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    width: int = 640,
    height: int = 400,
) -> str:
    """Multi-series line chart with axes, per-point markers and a legend.

    Each series must be non-empty with strictly increasing x. The y range is
    padded by 5% of the data span (falling back to a unit pad for flat data).
    """
    if not series:
        raise ValueError("no series to plot")
    for name, points in series.items():
        if not points:
            raise ValueError(f"series {name!r} is empty")
        xs = [p[0] for p in points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError(f"series {name!r} x values must be strictly increasing")

    all_x = sorted({p[0] for pts in series.values() for p in pts})
    all_y = [p[1] for pts in series.values() for p in pts]
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    y_span = y_hi - y_lo
    pad = 0.05 * y_span if y_span > 0 else 1.0
    y_lo, y_hi = y_lo - pad, y_hi + pad
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0

    left, right, top, bottom = 56, 24, 28, 48
    plot_w, plot_h = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return top + (y_hi - y) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="#FFFFFF"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="#333333"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" '
        f'stroke="#333333"/>',
    ]
    if title:
        out.append(f'<text x="{left}" y="18" font-size="14">{escape(title)}</text>')

    ticks = all_x if len(all_x) <= 24 else all_x[:: max(1, len(all_x) // 24 + 1)]
    for x in ticks:
        out.append(
            f'<line class="xtick" x1="{px(x):.1f}" y1="{top + plot_h}" '
            f'x2="{px(x):.1f}" y2="{top + plot_h + 5}" stroke="#333333"/>'
        )
        out.append(
            f'<text x="{px(x):.1f}" y="{top + plot_h + 18}" font-size="10" '
            f'text-anchor="middle">{x:g}</text>'
        )
    for k in range(5):
        y = y_lo + (y_hi - y_lo) * k / 4
        out.append(
            f'<line class="ytick" x1="{left - 5}" y1="{py(y):.1f}" x2="{left}" '
            f'y2="{py(y):.1f}" stroke="#333333"/>'
        )
        out.append(
            f'<text x="{left - 8}" y="{py(y) + 3:.1f}" font-size="10" '
            f'text-anchor="end">{y:.4g}</text>'
        )
    if x_label:
        out.append(
            f'<text x="{left + plot_w / 2:.1f}" y="{height - 10}" font-size="11" '
            f'text-anchor="middle">{escape(x_label)}</text>'
        )
    if y_label:
        out.append(
            f'<text x="14" y="{top + plot_h / 2:.1f}" font-size="11" text-anchor="middle" '
            f'transform="rotate(-90 14 {top + plot_h / 2:.1f})">{escape(y_label)}</text>'
        )

    for idx, (name, points) in enumerate(series.items()):
        color = PALETTE[idx % len(PALETTE)]
        coords = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in points)
        out.append(
            f'<polyline class="series" points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.8"/>'
        )
        for x, y in points:
            out.append(
                f'<circle class="marker" cx="{px(x):.1f}" cy="{py(y):.1f}" r="2.6" '
                f'fill="{color}"/>'
            )
        ly = top + 14 + idx * 16
        out.append(
            f'<rect x="{left + plot_w - 110}" y="{ly - 9}" width="12" height="4" fill="{color}"/>'
        )
        out.append(
            f'<text x="{left + plot_w - 92}" y="{ly - 3}" font-size="11">{escape(name)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"

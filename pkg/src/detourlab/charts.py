"""Dependency-free SVG line charts for the report command.

The CSVs are the authoritative outputs; these charts are a convenience view
with deterministic bytes for a given input.
"""

from __future__ import annotations

from pathlib import Path

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")

_W, _H = 640, 400
_MARGIN = 56


def _scale(values, lo_px, hi_px):
    vmin = min(values)
    vmax = max(values)
    if vmax == vmin:
        vmin -= 1.0
        vmax += 1.0
    span = vmax - vmin

    def to_px(v):
        return lo_px + (v - vmin) / span * (hi_px - lo_px)

    return to_px, vmin, vmax


def write_line_chart(path, title: str, series: list[tuple[str, list[tuple[float, float]]]],
                     x_label: str = "", y_label: str = "") -> None:
    """Write a minimal multi-series line chart as SVG."""
    xs = [x for _, pts in series for x, _ in pts]
    ys = [y for _, pts in series for _, y in pts]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    sx, xmin, xmax = _scale(xs, _MARGIN, _W - _MARGIN)
    sy, ymin, ymax = _scale(ys, _H - _MARGIN, _MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
        f'<line x1="{_MARGIN}" y1="{_H - _MARGIN}" x2="{_W - _MARGIN}" y2="{_H - _MARGIN}" '
        f'stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" y2="{_H - _MARGIN}" stroke="black"/>',
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-size="12">{x_label}</text>',
        f'<text x="16" y="{_H / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_H / 2})">{y_label}</text>',
        f'<text x="{_MARGIN}" y="{_H - _MARGIN + 16}" font-size="10">{xmin:g}</text>',
        f'<text x="{_W - _MARGIN}" y="{_H - _MARGIN + 16}" text-anchor="end" '
        f'font-size="10">{xmax:g}</text>',
        f'<text x="{_MARGIN - 4}" y="{_H - _MARGIN}" text-anchor="end" '
        f'font-size="10">{ymin:g}</text>',
        f'<text x="{_MARGIN - 4}" y="{_MARGIN + 4}" text-anchor="end" '
        f'font-size="10">{ymax:g}</text>',
    ]
    for i, (name, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        if pts:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
            parts.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>'
            )
        ly = _MARGIN + 16 * i
        parts.append(f'<rect x="{_W - _MARGIN - 120}" y="{ly - 8}" width="10" height="10" '
                     f'fill="{color}"/>')
        parts.append(f'<text x="{_W - _MARGIN - 104}" y="{ly}" font-size="11">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")

"""Dependency-free SVG line charts for metrics files.

Output is deterministic: fixed canvas, fixed palette, fixed number
formatting, no timestamps.
"""

from __future__ import annotations

import csv
from pathlib import Path

WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 60, 20, 30, 40
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

DEFAULT_COLUMNS = ["server_val_loss", "server_val_acc", "server_test_acc"]


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def render_line_chart(
    rows: list[dict[str, float]],
    x_column: str,
    columns: list[str],
    title: str = "",
) -> str:
    if not rows:
        raise ValueError("no rows to chart")
    for col in [x_column] + columns:
        if col not in rows[0]:
            raise ValueError(f"column {col!r} not present in data")

    xs = [row[x_column] for row in rows]
    x_lo, x_hi = min(xs), max(xs)
    ys = [row[col] for row in rows for col in columns]
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x):
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{title}</text>',
        # axes
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" '
        f'y2="{HEIGHT - MARGIN_BOTTOM}" stroke="black"/>',
        f'<line x1="{MARGIN_LEFT}" y1="{HEIGHT - MARGIN_BOTTOM}" x2="{WIDTH - MARGIN_RIGHT}" '
        f'y2="{HEIGHT - MARGIN_BOTTOM}" stroke="black"/>',
        # axis extent labels
        f'<text x="{MARGIN_LEFT}" y="{HEIGHT - MARGIN_BOTTOM + 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="10">{_fmt(x_lo)}</text>',
        f'<text x="{WIDTH - MARGIN_RIGHT}" y="{HEIGHT - MARGIN_BOTTOM + 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="10">{_fmt(x_hi)}</text>',
        f'<text x="{MARGIN_LEFT - 6}" y="{HEIGHT - MARGIN_BOTTOM}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{_fmt(y_lo)}</text>',
        f'<text x="{MARGIN_LEFT - 6}" y="{MARGIN_TOP + 10}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{_fmt(y_hi)}</text>',
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 8}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{x_column}</text>',
    ]
    for i, col in enumerate(columns):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(f"{sx(row[x_column]):.2f},{sy(row[col]):.2f}" for row in rows)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>')
        legend_y = MARGIN_TOP + 14 * i + 8
        parts.append(
            f'<rect x="{WIDTH - MARGIN_RIGHT - 150}" y="{legend_y - 8}" width="10" height="10" '
            f'fill="{color}"/>'
        )
        parts.append(
            f'<text x="{WIDTH - MARGIN_RIGHT - 136}" y="{legend_y}" font-family="sans-serif" '
            f'font-size="11">{col}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def report_from_csv(
    in_path: str | Path,
    out_path: str | Path,
    columns: list[str] | None = None,
) -> Path:
    """Chart the named metric columns of a metrics.csv against the round index."""
    in_path = Path(in_path)
    if not in_path.exists():
        raise FileNotFoundError(f"metrics file not found: {in_path}")
    with open(in_path, newline="") as handle:
        reader = csv.DictReader(handle)
        rows = [{key: float(value) for key, value in row.items()} for row in reader]
    if not rows:
        raise ValueError(f"{in_path}: no data rows")
    columns = columns or [c for c in DEFAULT_COLUMNS if c in rows[0]]
    svg = render_line_chart(rows, "round", columns, title=in_path.stem)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(svg)
    return out_path

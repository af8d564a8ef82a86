"""Dependency-free SVG line charts of metrics CSVs."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

from .experiment import ArtifactIOError, read_csv

WIDTH, HEIGHT = 640, 400
MARGIN = 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def render_svg(series: dict, title: str = "", y_label: str = "moving average cost",
               x_label: str = "episode") -> str:
    """SVG text with one polyline per named ``[(x, y), ...]`` series."""
    if not series or any(len(pts) == 0 for pts in series.values()):
        raise ValueError("every series needs at least one point")
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 10}" text-anchor="middle" '
        f'font-size="12">{x_label}</text>',
        f'<text x="15" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {HEIGHT / 2})">{y_label}</text>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 15}" font-size="10">{x0:g}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 15}" font-size="10" '
        f'text-anchor="end">{x1:g}</text>',
        f'<text x="{MARGIN - 5}" y="{HEIGHT - MARGIN}" font-size="10" '
        f'text-anchor="end">{y0:.3g}</text>',
        f'<text x="{MARGIN - 5}" y="{MARGIN + 10}" font-size="10" text-anchor="end">{y1:.3g}</text>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for k, (name, pts) in enumerate(sorted(series.items())):
        color = COLORS[k % len(COLORS)]
        coords = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" points="{coords}"/>')
        out.append(f'<text x="{WIDTH - MARGIN + 5}" y="{MARGIN + 14 * k}" font-size="10" '
                   f'fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_chart(csv_path, output_path, title: str = "") -> Path:
    """Chart the moving-average cost of every seed in ``csv_path`` as SVG.

    Nothing is written when the CSV fails to parse or holds no rows.
    """
    rows = read_csv(csv_path)
    series: dict = {}
    for r in rows:
        series.setdefault(f"seed {r['seed']}", []).append((r["episode"], r["moving_avg_cost"]))
    if not series:
        raise ValueError(f"{csv_path}: no data rows")
    svg = render_svg(series, title=title)
    output_path = Path(output_path)
    try:
        output_path.write_text(svg, encoding="utf-8")
    except OSError as exc:
        raise ArtifactIOError(output_path, exc) from exc
    return output_path

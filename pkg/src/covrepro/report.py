"""CSV and SVG serialisation of sweep results."""

from __future__ import annotations

import csv
import io
import math
from xml.sax.saxutils import escape

POPULATION_COLUMNS = ("set", "q", "per_factor", "l", "delta_r", "delta_b", "gap")
SAMPLE_COLUMNS = (
    "cell", "q", "oblique", "per_factor", "l", "loading_mode", "n", "reps",
    "delta_r_mean", "delta_b_mean", "gap_mean", "gap_sd", "nonconverged", "heywood_events",
)
THRESHOLD_COLUMNS = ("set", "per_factor", "threshold", "censored")
VERIFY_COLUMNS = ("theorem", "conditions_checked", "max_violation", "tolerance", "passed", "detail")


def fmt(value) -> str:
    """12 significant digits for floats; booleans as 0/1; None as empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.12g}"
    return str(value)


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(columns, rows))


def population_rows(records):
    for r in records:
        yield (r.cell, r.q, r.per_factor, r.l, r.delta_r_mean, r.delta_b_mean, r.gap_mean)


def sample_rows(records):
    for r in records:
        yield (
            r.cell, r.q, r.oblique, r.per_factor, r.l, r.loading_mode, r.n, r.reps,
            r.delta_r_mean, r.delta_b_mean, r.gap_mean, r.gap_sd,
            r.nonconverged, r.heywood_events,
        )


def _diverging(value: float, vmax: float) -> str:
    # blue (negative) -> white (0) -> red (positive)
    t = 0.0 if vmax <= 0 else max(-1.0, min(1.0, value / vmax))
    if t >= 0:
        r, g, b = 255, round(255 * (1 - t)), round(255 * (1 - t))
    else:
        r, g, b = round(255 * (1 + t)), round(255 * (1 + t)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(title: str, x_values, y_values, cells: dict, x_label="l", y_label="p/q") -> str:
    """Rect-grid heatmap with a colour scale centred at zero.

    ``cells`` maps ``(x, y)`` to a value; missing cells are drawn grey.
    """
    cw, ch, left, top = 40, 28, 70, 50
    width = left + cw * len(x_values) + 140
    height = top + ch * len(y_values) + 60
    vals = [v for v in cells.values() if not math.isnan(v)]
    vmax = max((abs(v) for v in vals), default=0.0)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{left}" y="20" font-size="14">{escape(title)}</text>',
    ]
    for j, y in enumerate(y_values):
        ypos = top + j * ch
        out.append(f'<text x="{left - 8}" y="{ypos + ch / 2 + 4}" text-anchor="end">{fmt(y)}</text>')
        for i, x in enumerate(x_values):
            v = cells.get((x, y), math.nan)
            color = "#cccccc" if math.isnan(v) else _diverging(v, vmax)
            out.append(
                f'<rect x="{left + i * cw}" y="{ypos}" width="{cw}" height="{ch}" '
                f'fill="{color}" stroke="#ffffff"><title>{x_label}={fmt(x)} {y_label}={fmt(y)} '
                f'gap={fmt(v)}</title></rect>'
            )
    base = top + ch * len(y_values)
    for i, x in enumerate(x_values):
        out.append(f'<text x="{left + i * cw + cw / 2}" y="{base + 16}" text-anchor="middle">{fmt(x)}</text>')
    out.append(f'<text x="{left + cw * len(x_values) / 2}" y="{base + 36}" text-anchor="middle">{x_label}</text>')
    out.append(f'<text x="16" y="{top + ch * len(y_values) / 2}" transform="rotate(-90 16 '
               f'{top + ch * len(y_values) / 2})" text-anchor="middle">{y_label}</text>')
    # legend
    lx = left + cw * len(x_values) + 30
    steps = 11
    for k in range(steps):
        v = vmax * (1 - 2 * k / (steps - 1))
        out.append(f'<rect x="{lx}" y="{top + k * 14}" width="20" height="14" fill="{_diverging(v, vmax)}"/>')
    out.append(f'<text x="{lx + 26}" y="{top + 10}">{fmt(vmax)}</text>')
    out.append(f'<text x="{lx + 26}" y="{top + 14 * (steps // 2) + 10}">0</text>')
    out.append(f'<text x="{lx + 26}" y="{top + 14 * (steps - 1) + 10}">{fmt(-vmax)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

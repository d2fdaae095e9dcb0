"""CSV, JSON and SVG output.

CSV floats are written with 17 significant digits, so reading them back with
:func:`read_csv` restores the exact doubles.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

import numpy as np

__all__ = [
    "OutputExistsError",
    "format_value",
    "read_csv",
    "svg_line_plot",
    "write_csv",
    "write_json",
    "write_text",
]


class OutputExistsError(FileExistsError):
    def __init__(self, path):
        super().__init__(f"{path} already exists (pass --overwrite to replace it)")


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _parse_value(s: str):
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _target(path, overwrite: bool) -> Path:
    path = Path(path)
    if path.exists() and not overwrite:
        raise OutputExistsError(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], overwrite: bool = False) -> Path:
    path = _target(path, overwrite)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list]]:
    """Return the header and rows, converting numbers and booleans."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_parse_value(cell) for cell in row] for row in reader]
    return header, rows


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def write_json(path, obj, overwrite: bool = False) -> Path:
    path = _target(path, overwrite)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_text(path, text: str, overwrite: bool = False) -> Path:
    path = _target(path, overwrite)
    path.write_text(text)
    return path


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def svg_line_plot(series, *, xlabel: str = "", ylabel: str = "", title: str = "",
                  vlines=(), xlim=None, ylim=None, width: int = 640, height: int = 420) -> str:
    """Render polylines as a standalone SVG document.

    ``series`` holds dicts with keys ``x``, ``y`` and optionally ``color``,
    ``dashed`` and ``label``. ``vlines`` holds ``(x, color, label)`` markers.
    """
    xs = np.concatenate([np.asarray(s["x"], float) for s in series] + [np.array([v[0] for v in vlines], float)])
    ys = np.concatenate([np.asarray(s["y"], float) for s in series])
    x0, x1 = xlim or (float(np.min(xs)), float(np.max(xs)))
    y0, y1 = ylim or (float(np.min(ys)), float(np.max(ys)))
    if y1 <= y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad_y = 0.05 * (y1 - y0)
    if ylim is None:
        y0, y1 = y0 - pad_y, y1 + pad_y
    left, right, top, bottom = 70, 20, 40, 55
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{top + ph}" x2="{px(t):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{left - 5}" y1="{py(t):.2f}" x2="{left}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2}" y="{top - 15}" text-anchor="middle" font-size="14">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>')
    out.append(f'<clipPath id="plot"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></clipPath>')
    legend = []
    for s in series:
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(s["x"], s["y"]))
        color = s.get("color", "black")
        dash = ' stroke-dasharray="6,4"' if s.get("dashed") else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"{dash} clip-path="url(#plot)"/>')
        if s.get("label"):
            legend.append((s["label"], color, s.get("dashed", False)))
    for x, color, label in vlines:
        out.append(f'<line x1="{px(x):.2f}" y1="{top}" x2="{px(x):.2f}" y2="{top + ph}" stroke="{color}" stroke-width="1.5"/>')
        if label:
            legend.append((label, color, False))
    for i, (label, color, dashed) in enumerate(legend):
        ly = top + 14 + 16 * i
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        out.append(f'<line x1="{left + pw - 150}" y1="{ly}" x2="{left + pw - 120}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{left + pw - 114}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

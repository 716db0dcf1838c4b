"""CSV and SVG output.

CSV files open with ``# key = value`` metadata lines followed by a header row
and data rows. Floats are written with 17 significant digits, so reading a
file back gives the in-memory doubles bit for bit.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["format_float", "write_csv", "read_csv", "write_svg"]


def format_float(v: float) -> str:
    return f"{float(v):.17g}"


def write_csv(path: str | Path, meta: Mapping[str, object], columns: Mapping[str, Sequence[float]]) -> Path:
    path = Path(path)
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    n = len(arrays[0]) if arrays else 0
    if any(len(a) != n for a in arrays):
        raise ValueError("all CSV columns must have the same length")
    lines = []
    for k, v in meta.items():
        text = str(v).replace("\n", " ")
        lines.append(f"# {k} = {text}")
    lines.append(",".join(names))
    for i in range(n):
        lines.append(",".join(format_float(a[i]) for a in arrays))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path: str | Path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    meta: dict[str, str] = {}
    header = None
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            meta[k.strip()] = v.strip()
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append([float(s) for s in line.split(",")])
    if header is None:
        return meta, {}
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return meta, {name: data[:, j].copy() for j, name in enumerate(header)}


_W, _H = 640, 400
_PAD_L, _PAD_R, _PAD_T, _PAD_B = 70, 20, 30, 45
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def write_svg(path: str | Path, series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
              title: str = "", log_scale: bool = False, xlabel: str = "t", ylabel: str = "energy") -> Path:
    """Static line chart, one ``<polyline>`` per series.

    With ``log_scale`` the y axis is ``log10`` and nonpositive or non-finite
    samples are dropped from the polyline.
    """
    prepared = []
    for name, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if log_scale:
            keep &= y > 0
        x, y = x[keep], y[keep]
        prepared.append((name, x, np.log10(y) if log_scale else y))

    xs = np.concatenate([p[1] for p in prepared]) if prepared else np.array([])
    ys = np.concatenate([p[2] for p in prepared]) if prepared else np.array([])
    x_lo, x_hi = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y_lo, y_hi = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pw, ph = _W - _PAD_L - _PAD_R, _H - _PAD_T - _PAD_B

    def sx(v):
        return _PAD_L + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v):
        return _PAD_T + ph - (v - y_lo) / (y_hi - y_lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
           f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
           f'<line x1="{_PAD_L}" y1="{_PAD_T + ph}" x2="{_PAD_L + pw}" y2="{_PAD_T + ph}" stroke="black"/>',
           f'<line x1="{_PAD_L}" y1="{_PAD_T}" x2="{_PAD_L}" y2="{_PAD_T + ph}" stroke="black"/>']
    for v in _ticks(x_lo, x_hi):
        out.append(f'<text x="{sx(v):.2f}" y="{_PAD_T + ph + 16}" font-size="11" text-anchor="middle">{v:.4g}</text>')
    for v in _ticks(y_lo, y_hi):
        label = f"1e{v:.2g}" if log_scale else f"{v:.4g}"
        out.append(f'<text x="{_PAD_L - 6}" y="{sy(v) + 4:.2f}" font-size="11" text-anchor="end">{label}</text>')
    out.append(f'<text x="{_PAD_L + pw / 2}" y="{_H - 8}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    ylab = f"{ylabel} (log10)" if log_scale else ylabel
    out.append(f'<text x="14" y="{_PAD_T + ph / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {_PAD_T + ph / 2})">{escape(ylab)}</text>')
    if title:
        out.append(f'<text x="{_W / 2}" y="18" font-size="13" text-anchor="middle">{escape(title)}</text>')
    for j, (name, x, y) in enumerate(prepared):
        color = _COLORS[j % len(_COLORS)]
        # long series are thinned for the picture only; the CSV keeps every sample
        step = max(1, math.ceil(x.size / 4000))
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[::step], y[::step]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}">'
                   f"<title>{escape(name)}</title></polyline>")
        out.append(f'<text x="{_PAD_L + pw - 4}" y="{_PAD_T + 14 + 14 * j}" font-size="11" '
                   f'text-anchor="end" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path

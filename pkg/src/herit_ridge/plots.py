"""Dependency-free SVG line charts for curve tables.

Every chart is built from plain row dictionaries (the same rows written to
CSV), and number formatting is fixed so identical tables give identical bytes.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from herit_ridge.errors import EmptyCurve
from herit_ridge.theory import theoretical_corr2, theoretical_test_mse

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 40, 55
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


@dataclass
class Series:
    name: str
    x: Sequence[float]
    y: Sequence[float]
    style: str = "line"  # line | points | dashed
    yerr: Sequence[float] | None = None
    markers: list[tuple[float, float]] = field(default_factory=list)


def _f(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag * 10)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12:
        ticks.append(round(t, 10))
        t += step
    return ticks


def line_chart(series: Sequence[Series], title: str, xlabel: str, ylabel: str) -> str:
    """Render series into a standalone SVG document."""
    if not series or any(len(s.x) < 2 and s.style != "points" for s in series):
        raise EmptyCurve("each curve needs at least two rows")
    if all(len(s.x) < 2 for s in series):
        raise EmptyCurve("each curve needs at least two rows")
    xs = np.concatenate([np.asarray(s.x, float) for s in series])
    ys_parts = []
    for s in series:
        y = np.asarray(s.y, float)
        ys_parts.append(y)
        if s.yerr is not None:
            e = np.asarray(s.yerr, float)
            ys_parts += [y - e, y + e]
    ys = np.concatenate(ys_parts)
    finite = np.isfinite(ys)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys[finite].min()), float(ys[finite].max())
    if x1 == x0:
        x1 = x0 + 1.0
    pad = 0.05 * (y1 - y0 or 1.0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B

    def sx(v):
        return MARGIN_L + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN_T + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    for t in _nice_ticks(x0, x1):
        out.append(f'<line x1="{_f(sx(t))}" y1="{MARGIN_T + ph}" x2="{_f(sx(t))}" y2="{MARGIN_T + ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{_f(sx(t))}" y="{MARGIN_T + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y0, y1):
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{_f(sy(t))}" x2="{MARGIN_L}" y2="{_f(sy(t))}" stroke="#333"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{_f(sy(t) + 4)}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{MARGIN_T + ph / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN_T + ph / 2:.0f})">{escape(ylabel)}</text>'
    )
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = [(sx(a), sy(b)) for a, b in zip(s.x, s.y) if math.isfinite(b)]
        if s.style in ("line", "dashed"):
            dash = ' stroke-dasharray="6 4"' if s.style == "dashed" else ""
            path = " ".join(f"{_f(a)},{_f(b)}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>')
        else:
            out.extend(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="3" fill="{color}"/>' for a, b in pts)
        if s.yerr is not None:
            for a, b, e in zip(s.x, s.y, s.yerr):
                out.append(
                    f'<line x1="{_f(sx(a))}" y1="{_f(sy(b - e))}" x2="{_f(sx(a))}" y2="{_f(sy(b + e))}" '
                    f'stroke="{color}" stroke-width="1"/>'
                )
        for a, b in s.markers:
            out.append(
                f'<path d="M{_f(sx(a) - 5)},{_f(sy(b) - 5)} L{_f(sx(a) + 5)},{_f(sy(b) + 5)} '
                f'M{_f(sx(a) - 5)},{_f(sy(b) + 5)} L{_f(sx(a) + 5)},{_f(sy(b) - 5)}" stroke="{color}" stroke-width="2"/>'
            )
        ly = MARGIN_T + 14 + 18 * i
        lx = WIDTH - MARGIN_R + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(s.name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _column(rows, key) -> list[float]:
    return [float(r[key]) for r in rows]


def gcv_curves_svg(curves: dict[str, Sequence[dict]], title: str = "GCV error versus h2") -> str:
    """One line per named curve table (rows with ``h2`` and ``error``), argmin marked with a cross.

    Errors are divided by each curve's maximum so curves on different scales share the axis.
    """
    series = []
    for name, rows in curves.items():
        if len(rows) < 2:
            raise EmptyCurve(f"curve {name!r} has fewer than two rows")
        x, y = _column(rows, "h2"), np.asarray(_column(rows, "error"))
        y = y / y.max()
        i = int(np.argmin(y))
        series.append(Series(name, x, list(y), markers=[(x[i], float(y[i]))]))
    return line_chart(series, title, "h2", "relative error")


def theory_svg(rows: Sequence[dict], metric: str = "test_mse") -> str:
    """Theory table rows (``h2``, ``log_n_over_p``, metric) as one line per h2."""
    by_h2: dict[float, list[dict]] = {}
    for r in rows:
        by_h2.setdefault(float(r["h2"]), []).append(r)
    series = [
        Series(f"h2={h2:g}", _column(rs, "log_n_over_p"), _column(rs, metric)) for h2, rs in sorted(by_h2.items())
    ]
    label = {"test_mse": "test MSE", "train_mse": "training MSE", "corr2": "squared correlation"}[metric]
    return line_chart(series, f"Theoretical {label}", "log(n/p)", label)


def prediction_svg(rows: Sequence[dict], h2: float, metric: str = "err_p", aggregation: str = "training") -> str:
    """Empirical points with error bars over a dense theory curve.

    ``aggregation`` picks the error bars: ``training`` (sd of per-training-set
    means) or ``individual`` (sd of per-test-individual means, MSE only).
    """
    if len(rows) < 2:
        raise EmptyCurve("prediction table needs at least two rows")
    x = _column(rows, "log_n_over_p")
    y = _column(rows, metric)
    if metric == "err_p":
        key = "sd_over_training_sets" if aggregation == "training" else "sd_over_test_individuals"
        theory = theoretical_test_mse
        label = "test MSE"
    else:
        key = "corr2_sd_over_training_sets"
        theory = theoretical_corr2
        label = "squared correlation"
    dense = np.linspace(min(x), max(x), 121)
    th = [float(theory(math.exp(v), 1.0, h2)) for v in dense]
    series = [
        Series(f"theory h2={h2:g}", list(dense), th),
        Series(f"empirical ({aggregation})", x, y, style="points", yerr=_column(rows, key)),
    ]
    return line_chart(series, f"{label} versus log(n/p)", "log(n/p)", label)


def heritability_svg(summary_rows: Sequence[dict], n: int, p: int, f_c: float) -> str:
    """Mean estimation bias (+/- sd) against simulated h2, one series per method."""
    sel = [r for r in summary_rows if int(r["n"]) == n and int(r["p"]) == p and float(r["f_c"]) == f_c]
    by_method: dict[str, list[dict]] = {}
    for r in sel:
        by_method.setdefault(r["method"], []).append(r)
    if not by_method:
        raise EmptyCurve(f"no summary rows for n={n}, p={p}, f_c={f_c}")
    series = []
    for method, rs in sorted(by_method.items()):
        rs = sorted(rs, key=lambda r: float(r["h2_sim"]))
        series.append(
            Series(method, _column(rs, "h2_sim"), _column(rs, "mean_bias"), style="points", yerr=_column(rs, "sd_bias"))
        )
    return line_chart(series, f"h2_est - h2_sim (n={n}, p={p}, f_c={f_c:g})", "simulated h2", "bias")

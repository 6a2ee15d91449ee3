"""Trace CSV, run summary JSON and static SVG plots."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .plant import QuadState
from .simulation import MonitorReport, Trace

OBSERVER_COLUMNS = tuple(f"{d}_{a}" for d in ("pid", "vid", "aid") for a in "xyz")
INPUT_COLUMNS = ("u1", "u2", "u3", "u4")


def csv_header(n: int) -> list[str]:
    cols = ["t"]
    for i in range(1, n + 1):
        cols += [f"a{i}_{f}" for f in QuadState.field_names()]
        cols += [f"a{i}_{f}" for f in INPUT_COLUMNS]
        cols += [f"a{i}_{f}" for f in OBSERVER_COLUMNS]
        cols.append(f"a{i}_eta_norm")
    return cols + ["W", "W_bound"]


def trace_table(trace: Trace) -> np.ndarray:
    """The CSV body as an ``(m, columns)`` float array."""
    m, n = len(trace), trace.scenario.n
    ref = trace.reference
    # reference layout is x0..x4, y0..y4, z0..z4; keep orders 0..2
    observer = np.stack([ref[:, :, 5 * a + d] for d in range(3) for a in range(3)], axis=-1)
    per_agent = np.concatenate(
        [trace.plant, trace.controls, observer, trace.formation_error_norm[:, :, None]], axis=-1
    )
    w = trace.lyapunov()
    bound = trace.lyapunov_envelope() if m else np.empty(0)
    return np.column_stack([trace.t, per_agent.reshape(m, n * per_agent.shape[-1]), w, bound])


def write_trace_csv(trace: Trace, path: str | Path) -> Path:
    """Write every sample; numbers use the shortest round-trip decimal form."""
    path = Path(path)
    table = trace_table(trace)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(trace.scenario.n))
        for row in table.tolist():
            writer.writerow([repr(v) for v in row])
    return path


def summary_dict(trace: Trace, report: MonitorReport | None, error: str | None = None) -> dict:
    sc = trace.scenario
    out = {
        "scenario": sc.name,
        "mode": sc.mode,
        "completed": trace.completed,
        "samples": len(trace),
        "t_end": float(trace.t[-1]) if len(trace) else None,
        "dt": sc.dt,
        "observer_substeps": sc.observer_substeps,
    }
    if report is not None:
        out["monitors"] = report.to_dict()
    if error is not None:
        out["error"] = error
    return out


def write_summary(summary: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(summary, indent=2, allow_nan=True) + "\n")
    return path


# --------------------------------------------------------------------------
# SVG

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
WIDTH, PANEL_HEIGHT = 720, 260
MARGIN = (70, 20, 30, 45)  # left, right, top, bottom
MAX_POINTS = 4000


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    return [first + k * step for k in range(int((hi - first) / step + 1e-9) + 1)]


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _limits(arrays: Sequence[np.ndarray]) -> tuple[float, float]:
    vals = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    if hi - lo < 1e-12 * max(1.0, abs(hi)):
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


def _thin(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(x) <= MAX_POINTS:
        return x, y
    idx = np.unique(np.linspace(0, len(x) - 1, MAX_POINTS).astype(int))
    return x[idx], y[idx]


def _panel(series, top: float, title: str, xlabel: str, ylabel: str, equal: bool = False) -> list[str]:
    """SVG elements for one axes box; ``series`` is ``[(label, x, y, dashed)]``."""
    left, right, mtop, bottom = MARGIN
    x0, x1 = _limits([s[1] for s in series])
    y0, y1 = _limits([s[2] for s in series])
    pw, ph = WIDTH - left - right, PANEL_HEIGHT - mtop - bottom
    if equal:
        span = max(x1 - x0, (y1 - y0) * pw / ph)
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        x0, x1 = cx - span / 2, cx + span / 2
        y0, y1 = cy - span * ph / pw / 2, cy + span * ph / pw / 2

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + mtop + (y1 - v) / (y1 - y0) * ph

    el = [
        f'<rect x="{left}" y="{top + mtop}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{left + pw / 2}" y="{top + mtop - 8}" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{left + pw / 2}" y="{top + PANEL_HEIGHT - 8}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>',
        f'<text x="14" y="{top + mtop + ph / 2}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 14 {top + mtop + ph / 2})">{escape(ylabel)}</text>',
    ]
    for v in _ticks(x0, x1):
        el.append(f'<text x="{sx(v):.1f}" y="{top + mtop + ph + 14}" text-anchor="middle" font-size="10">{_fmt(v)}</text>')
    for v in _ticks(y0, y1):
        el.append(f'<line x1="{left}" x2="{left + pw}" y1="{sy(v):.1f}" y2="{sy(v):.1f}" stroke="#ddd"/>')
        el.append(f'<text x="{left - 4}" y="{sy(v) + 3:.1f}" text-anchor="end" font-size="10">{_fmt(v)}</text>')
    for k, (label, x, y, dashed) in enumerate(series):
        x, y = _thin(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[ok], y[ok]))
        color = "#000" if dashed else PALETTE[k % len(PALETTE)]
        dash = ' stroke-dasharray="5,4"' if dashed else ""
        el.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.4"{dash} points="{pts}"/>')
        ly = top + mtop + 14 + 14 * k
        el.append(f'<line x1="{left + pw - 110}" x2="{left + pw - 90}" y1="{ly - 4}" y2="{ly - 4}" stroke="{color}"{dash}/>')
        el.append(f'<text x="{left + pw - 86}" y="{ly}" font-size="10">{escape(label)}</text>')
    return el


def _document(panels: list[list[str]]) -> str:
    height = PANEL_HEIGHT * len(panels)
    body = "\n".join(e for p in panels for e in p)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n'
    )


def path_svg(trace: Trace) -> str:
    """Top view of every vehicle's path plus the leader, and altitude over time."""
    n = trace.scenario.n
    top = [(f"agent {i + 1}", trace.positions[:, i, 0], trace.positions[:, i, 1], False) for i in range(n)]
    top.append(("leader", trace.leader[:, 0, 0], trace.leader[:, 0, 1], True))
    alt = [(f"agent {i + 1}", trace.t, trace.positions[:, i, 2], False) for i in range(n)]
    alt.append(("leader", trace.t, trace.leader[:, 0, 2], True))
    return _document([
        _panel(top, 0, "paths (top view)", "x [m]", "y [m]", equal=True),
        _panel(alt, PANEL_HEIGHT, "altitude", "t [s]", "z [m]"),
    ])


def error_norm_svg(trace: Trace) -> str:
    err = trace.formation_error_norm
    series = [(f"agent {i + 1}", trace.t, err[:, i], False) for i in range(trace.scenario.n)]
    return _document([_panel(series, 0, "formation error norm", "t [s]", "|p_i - p_0 - delta_i| [m]")])


def attitudes_svg(trace: Trace) -> str:
    ang = np.degrees(trace.attitudes)
    panels = []
    for k, name in enumerate(("roll", "pitch", "yaw")):
        series = [(f"agent {i + 1}", trace.t, ang[:, i, k], False) for i in range(trace.scenario.n)]
        panels.append(_panel(series, k * PANEL_HEIGHT, name, "t [s]", f"{name} [deg]"))
    return _document(panels)


def write_plots(trace: Trace, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    for name, render in (("path.svg", path_svg), ("error_norm.svg", error_norm_svg), ("attitudes.svg", attitudes_svg)):
        p = out_dir / name
        p.write_text(render(trace))
        written.append(p)
    return written

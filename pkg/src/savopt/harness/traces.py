"""Trace files (CSV or JSON) and SVG loss plots."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

from ..sav import TRACE_FIELDS, TraceRecord

_FLOAT_FIELDS = TRACE_FIELDS[1:-1]


def _fmt(x) -> str:
    # repr gives the shortest string that round-trips exactly
    return repr(float(x))


def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_trace(trace, path, format: str = "csv") -> Path:
    path = Path(path)
    if format == "csv":
        with _open_for_write(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_FIELDS)
            for rec in trace:
                w.writerow([str(int(rec.k))] + [_fmt(getattr(rec, n)) for n in _FLOAT_FIELDS]
                           + [rec.status])
    elif format == "json":
        rows = []
        for rec in trace:
            row = {"k": int(rec.k)}
            for n in _FLOAT_FIELDS:
                v = float(getattr(rec, n))
                row[n] = v if math.isfinite(v) else None
            row["status"] = rec.status
            rows.append(row)
        with _open_for_write(path) as fh:
            json.dump({"fields": list(TRACE_FIELDS), "records": rows}, fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown trace format {format!r}")
    return path


def read_trace(path) -> list[TraceRecord]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if path.suffix == ".json":
        data = json.loads(text)
        return [TraceRecord(int(r["k"]),
                            *[float("nan") if r[n] is None else float(r[n])
                              for n in _FLOAT_FIELDS],
                            status=r["status"])
                for r in data["records"]]
    rows = list(csv.reader(text.splitlines()))
    if not rows or tuple(rows[0]) != TRACE_FIELDS:
        raise ValueError(f"{path}: not a trace file (bad header)")
    out = []
    for row in rows[1:]:
        out.append(TraceRecord(int(row[0]), *[float(x) for x in row[1:-1]],
                               status=row[-1]))
    return out


# ------------------------------------------------------------------- plotting

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _finite_prefix(trace):
    """(k, f) pairs up to the last finite loss value."""
    pts = []
    for rec in trace:
        if not math.isfinite(rec.f):
            break
        pts.append((rec.k, rec.f))
    return pts


def render_plot(traces, path, title: str = "loss", width: int = 720,
                height: int = 440) -> Path:
    """Overlay loss curves on a log-scale y axis.

    ``traces`` is a list of (label, records) pairs. A diverged curve is drawn
    up to its last finite value. Non-positive losses are drawn at the floor
    of the axis.
    """
    series = [(label, _finite_prefix(tr)) for label, tr in traces]
    pos = [f for _, pts in series for _, f in pts if f > 0]
    ks = [k for _, pts in series for k, _ in pts]
    lo = math.floor(math.log10(min(pos))) if pos else -1
    hi = math.ceil(math.log10(max(pos))) if pos else 1
    if hi <= lo:
        hi = lo + 1
    kmax = max(ks) if ks else 1
    kmax = kmax if kmax > 0 else 1

    ml, mr, mt, mb = 70, 170, 36, 46
    pw, ph = width - ml - mr, height - mt - mb

    def X(k):
        return ml + pw * k / kmax

    def Y(f):
        lf = math.log10(f) if f > 0 else lo
        lf = min(max(lf, lo), hi)
        return mt + ph * (hi - lf) / (hi - lo)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{ml + pw / 2:.1f}" y="20" text-anchor="middle" font-size="14">'
           f'{escape(title)}</text>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    step = max(1, (hi - lo) // 8)
    for e in range(lo, hi + 1, step):
        y = Y(10.0 ** e)
        out.append(f'<line x1="{ml}" y1="{y:.1f}" x2="{ml + pw}" y2="{y:.1f}" '
                   f'stroke="#dddddd"/>')
        out.append(f'<text x="{ml - 6}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
    for i in range(5):
        k = kmax * i / 4
        x = X(k)
        out.append(f'<text x="{x:.1f}" y="{mt + ph + 16}" text-anchor="middle">{k:g}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">'
               f'iteration</text>')
    for i, (label, pts) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{X(k):.2f},{Y(f):.2f}" for k, f in pts)
        out.append(f'<polyline class="trace" fill="none" stroke="{color}" '
                   f'stroke-width="1.5" points="{coords}"/>')
    for i, (label, _) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        y = mt + 12 + 18 * i
        x = ml + pw + 12
        out.append(f'<g class="legend-entry"><line x1="{x}" y1="{y}" x2="{x + 20}" '
                   f'y2="{y}" stroke="{color}" stroke-width="2"/>'
                   f'<text x="{x + 26}" y="{y + 4}">{escape(str(label))}</text></g>')
    out.append("</svg>")
    path = Path(path)
    with _open_for_write(path) as fh:
        fh.write("\n".join(out) + "\n")
    return path

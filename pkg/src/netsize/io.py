"""Trajectory CSV and run-report files."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .sim.engine import RunReport, TrajectorySample

CSV_COLUMNS = ("t", "agent_ordinal", "identifier", "component_id", "z", "mu", "x", "u",
               "x_rounded")


def write_trajectory_csv(path, samples: list[TrajectorySample], identifiers) -> None:
    ids = [int(a) for a in identifiers]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for s in samples:
            t = repr(float(s.t))
            for k, a in enumerate(ids):
                # repr gives the shortest round-tripping decimal (up to 17 digits)
                w.writerow((t, k, a, int(s.component_id[k]), repr(float(s.z[k])),
                            repr(float(s.mu[k])), repr(float(s.x[k])), int(s.u[k]),
                            int(s.x_rounded[k])))


def read_trajectory_csv(path) -> tuple[list[TrajectorySample], list[int]]:
    """Parse a file written by :func:`write_trajectory_csv`."""
    rows: dict[float, list] = {}
    ids: dict[int, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        if header != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        for row in r:
            t = float(row[0])
            k = int(row[1])
            ids[k] = int(row[2])
            rows.setdefault(t, []).append((k, int(row[3]), float(row[4]), float(row[5]),
                                           float(row[6]), int(row[7]), int(row[8])))
    n = len(ids)
    out = []
    for t in rows:
        recs = sorted(rows[t])
        if [rec[0] for rec in recs] != list(range(n)):
            raise ValueError(f"sample t={t} does not list every agent once")
        cols = list(zip(*recs))
        out.append(TrajectorySample(
            t, np.array(cols[2]), np.array(cols[3]), np.array(cols[4]),
            np.array(cols[5], dtype=np.int64), np.array(cols[6], dtype=np.int64),
            np.array(cols[1], dtype=np.int64)))
    return out, [ids[k] for k in range(n)]


def _id_span(ids) -> str:
    s = sorted(ids)
    if len(s) > 1 and s[-1] - s[0] == len(s) - 1:
        return f"{s[0]}..{s[-1]}"
    return ",".join(map(str, s))


def _fmt(v, spec=".6g") -> str:
    if v is None:
        return "unsettled"
    if isinstance(v, float) and math.isinf(v):
        return "+inf (vacuous)" if v > 0 else "-inf"
    return format(v, spec)


def format_report(report: RunReport) -> str:
    lines = []
    for k, w in enumerate(report.windows):
        est = ", ".join(str(c.estimate) if c.estimate is not None else "?" for c in w.components)
        lines.append(f"window {k}: t in [{w.t_start:g}, {w.t_end:g})  estimates: {{{est}}}")
        lines.append(f"  sum(mu) drift: {w.mu_sum_max_drift:.3e}")
        for c in w.components:
            ids = c.identifiers
            span = _id_span(ids)
            lines.append(
                f"  component {c.component_id}: ids {span}  N={c.local_n}  a_max={c.a_max}  "
                f"estimate={c.estimate}  max-id estimate={c.max_id_estimate}")
            lines.append(
                f"    settling  u: {_fmt(c.u_settle, 'g')}  round(x): {_fmt(c.x_settle, 'g')}")
            lines.append(
                f"    bounds    beta={_fmt(c.beta)}  T1={_fmt(c.t1)}  log c={_fmt(c.log_c)}  "
                f"T2={_fmt(c.t2)}")
            t2v = str(c.size_envelope_violations) if c.size_envelope_checked else "n/a (c not finite)"
            lines.append(
                f"    envelope violations  z: {c.max_id_envelope_violations}  x: {t2v}  "
                f"({c.samples} samples)")
    s = report.stats
    if s:
        lines.append(f"steps: {s.get('accepted', 0)} accepted, {s.get('rejected', 0)} rejected; "
                     f"affine intervals: {s.get('affine_intervals', 0)} "
                     f"({s.get('affine_fallbacks', 0)} fallbacks)")
    return "\n".join(lines) + "\n"


def write_report(out_dir, report: RunReport) -> tuple[Path, Path]:
    out = Path(out_dir)
    txt, js = out / "report.txt", out / "report.json"
    txt.write_text(format_report(report), encoding="utf-8")
    js.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return txt, js

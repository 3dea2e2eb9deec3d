"""Atomic file output for trajectories, reports and run summaries.

Every file is written to a temporary sibling and moved into place with
``os.replace``, so an interrupted run never leaves a truncated file behind.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from .report import ExperimentReport
from .state import Trajectory


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    return path


def _jsonable(obj):
    # JSON has no inf/nan literals; keep them readable as strings
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return _jsonable(obj.item())
    return obj


def write_json(path, payload) -> Path:
    return atomic_write_text(path, json.dumps(_jsonable(payload), indent=2) + "\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return atomic_write_text(path, buf.getvalue())


def write_trajectory(out_dir, traj: Trajectory, manifest: dict, stem: str = "trajectory") -> Path:
    """Write ``<stem>.csv`` (t, psi_1..psi_n, mass, mu0) and the ``<stem>.json`` manifest."""
    out_dir = Path(out_dir)
    n = traj.n
    header = ["t"] + [f"psi_{i}" for i in range(1, n + 1)] + ["mass", "mu0"]
    rows = (
        [float(t)] + s.psi.tolist() + [d.mass, d.mu0]
        for t, s, d in zip(traj.times, traj.states, traj.diagnostics)
    )
    write_csv(out_dir / f"{stem}.csv", header, rows)
    body = dict(manifest)
    body["csv"] = f"{stem}.csv"
    body["samples"] = len(traj.times)
    body["max_mass_drift"] = traj.max_mass_drift()
    body["diagnostics"] = [
        {"t": float(t), "mass": d.mass, "mu0": d.mu0, "step_count": d.step_count,
         "rejected_steps": d.rejected_steps, "mass_drift": d.mass_drift,
         "min_component": d.min_component}
        for t, d in zip(traj.times, traj.diagnostics)
    ]
    return write_json(out_dir / f"{stem}.json", body)


def write_report(out_dir, report: ExperimentReport) -> Path:
    """One JSON per report; each data table goes to a CSV named in ``data``."""
    out_dir = Path(out_dir)
    body = report.to_dict()
    files = {}
    for table, (header, rows) in report.data.items():
        fname = f"{report.name}.{table}.csv"
        write_csv(out_dir / fname, header, rows)
        files[table] = fname
    body["data"] = files
    return write_json(out_dir / f"{report.name}.json", body)


def summarize(reports: Sequence[ExperimentReport]) -> dict:
    """Counts over gating reports; exploratory ones are listed but not counted."""
    gating = [r for r in reports if not r.exploratory]
    failed = [r.name for r in gating if not r.passed]
    return {
        "total": len(gating),
        "passed": len(gating) - len(failed),
        "failed": len(failed),
        "failed_names": failed,
        "exploratory": [{"name": r.name, "pass": r.passed} for r in reports if r.exploratory],
    }

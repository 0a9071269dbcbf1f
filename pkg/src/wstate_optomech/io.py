"""Schedule/report JSON files and CSV export, all written atomically."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .schedule import CouplingSchedule, schedule_from_dict

FORMAT_VERSION = 1


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def schedule_to_json(schedule: CouplingSchedule, units_note: str = "g0") -> str:
    d = schedule.to_dict()
    d["format_version"] = FORMAT_VERSION
    d["units"] = units_note
    return dumps(d)


def save_schedule(path, schedule: CouplingSchedule) -> Path:
    """Couplings in multiples of g0 and times in units of 1/g0."""
    return atomic_write(path, schedule_to_json(schedule))


def load_schedule(path) -> CouplingSchedule:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported schedule format version {version!r}")
    return schedule_from_dict(d)


def save_report(path, report, extra: dict | None = None) -> Path:
    d = report.to_dict()
    d["format_version"] = FORMAT_VERSION
    if extra:
        d.update(extra)
    return atomic_write(path, dumps(d))


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _csv(header_comment: str | None, columns: list[str], rows) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def pulse_csv(pulse, note: str | None = None) -> str:
    t = pulse.grid.times
    rows = np.column_stack([t, pulse.samples.real, pulse.samples.imag])
    return _csv(note, ["t", "re_f", "im_f"], rows)


def trajectory_csv(traj, note: str | None = None) -> str:
    n = traj.states.shape[1] - 2
    names = [f"d{j}" for j in range(n + 1)] + ["dm"]
    cols = ["t"]
    for name in names:
        cols += [f"re_{name}", f"im_{name}"]
    cols += ["norm2", "flux_out_cum"]
    parts = [traj.grid.times]
    for j in range(n + 2):
        parts += [traj.states[:, j].real, traj.states[:, j].imag]
    parts += [traj.norm2, traj.flux_out_cum]
    return _csv(note, cols, np.column_stack(parts))


def read_pulse_csv(path):
    """Returns (t, f) arrays; comment lines are skipped."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    rows = list(reader)
    t = np.array([float(r["t"]) for r in rows])
    f = np.array([float(r["re_f"]) + 1j * float(r["im_f"]) for r in rows])
    return t, f

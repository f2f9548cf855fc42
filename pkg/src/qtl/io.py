"""CSV output with fixed, versioned schemas and atomic writes.

All floats are rendered with 17 significant digits so that files are
bit-reproducible and lossless.  Writes go to a temporary file in the
destination directory followed by an atomic rename, so an interrupted
run never leaves a truncated file at the final path.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .chaos import LyapunovResult, StrobePoint
from .record import TrajectoryRecord

SCHEMA_VERSION = 1

TRAJECTORY_HEADER = "t,mean_x,mean_p,var_x,var_p,cov_xp,norm,energy"
RECORD_RAW_HEADER = "t,y_raw"
RECORD_AVG_HEADER = "t_center,y_avg"
STROBE_HEADER = "run,period_index,x,p"
LYAPUNOV_HEADER = "tau,mean_ln_delta,stderr"


def _f(x: float) -> str:
    return "%.17g" % x


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write text to path via temp-file-plus-rename in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header: str, rows) -> str:
    lines = [f"# schema v{SCHEMA_VERSION}", header]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def write_trajectory(path, rec: TrajectoryRecord) -> None:
    rows = (
        (_f(rec.t[i]), _f(rec.mean_x[i]), _f(rec.mean_p[i]), _f(rec.var_x[i]),
         _f(rec.var_p[i]), _f(rec.cov_xp[i]), _f(rec.norm[i]), _f(rec.energy[i]))
        for i in range(rec.t.size))
    atomic_write_text(path, _csv(TRAJECTORY_HEADER, rows))


def write_record_raw(path, rec: TrajectoryRecord) -> None:
    rows = ((_f(rec.record_t[i]), _f(rec.record_y[i]))
            for i in range(rec.record_t.size))
    atomic_write_text(path, _csv(RECORD_RAW_HEADER, rows))


def write_record_avg(path, t_center: np.ndarray, y_avg: np.ndarray) -> None:
    rows = ((_f(t_center[i]), _f(y_avg[i])) for i in range(t_center.size))
    atomic_write_text(path, _csv(RECORD_AVG_HEADER, rows))


def write_strobe(path, points_by_run: list[list[StrobePoint]]) -> None:
    rows = ((str(run), str(pt.period_index), _f(pt.x), _f(pt.p))
            for run, points in enumerate(points_by_run) for pt in points)
    atomic_write_text(path, _csv(STROBE_HEADER, rows))


def write_lyapunov(path, res: LyapunovResult) -> None:
    stderr = res.curve_stderr if res.curve_stderr.size else np.zeros_like(res.tau)
    rows = ((_f(res.tau[i]), _f(res.mean_ln_delta[i]), _f(stderr[i]))
            for i in range(res.tau.size))
    atomic_write_text(path, _csv(LYAPUNOV_HEADER, rows))


def write_sweep(path, rows_in) -> None:
    header = "k,lambda,stderr,flatness"
    rows = ((_f(r.k), _f(r.result.lam), _f(r.result.stderr), r.flatness)
            for r in rows_in)
    atomic_write_text(path, _csv(header, rows))

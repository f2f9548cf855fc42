"""Seeded orchestration: single runs, parallel ensembles, file output.

Every mode writes its delimited outputs, the matplotlib figures for its
report, and a ``resolved_config.txt`` capturing the exact configuration
(including all defaults) that produced them.  Per-trajectory randomness
comes from counter-based substreams keyed on (seed, trajectory index),
so results are independent of the worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io, plots
from .chaos import (ClassicalLyapunovConfig, QuantumLyapunovConfig,
                    band_limit_record, k_sensitivity_sweep, lyapunov_estimate,
                    stroboscopic_map)
from .classical import ClassicalState, matched_noise, run_classical_trajectory
from .config import RunConfig, parse_config, render_config
from .errors import NumericalError, QtlError
from .grid import init_gaussian
from .quantum import MeasureParams, regime_check, run_quantum_trajectory
from .record import TrajectoryRecord


def _band_limit(config: RunConfig, rec: TrajectoryRecord) -> TrajectoryRecord:
    if rec.record_t.size:
        window = config["record.window"]
        dt = config["run.dt"]
        if window >= dt:
            rec.avg_t, rec.avg_y = band_limit_record(
                rec.record_t, rec.record_y, window, dt)
    return rec


def build_trajectory(config: RunConfig, index: int, kind: str) -> TrajectoryRecord:
    """One trajectory of the configured ensemble (substream = (seed, index))."""
    sp = config.system()
    dt, T = config["run.dt"], config["run.T"]
    sample_every = config["run.sample_every"]
    if kind == "quantum":
        mp = config.measure()
        state = init_gaussian(config.grid(), config["init.x0"],
                              config["init.p0"], config.init_sigma(), mp.hbar)
        rec = run_quantum_trajectory(state, T, dt, sp, mp, config.seed,
                                     sample_every, stream_path=(index,))
        rec = _band_limit(config, rec)
    elif kind == "classical":
        init = ClassicalState(config["init.x0"], config["init.p0"])
        rec = run_classical_trajectory(init, T, dt, sp, config.noise(),
                                       config.seed, sample_every,
                                       stream_path=(index,))
    else:
        raise QtlError(f"unknown trajectory kind {kind!r}")
    rec.fingerprint = config.fingerprint()
    return rec


def _ensemble_worker(args):
    text, index, kind = args
    config = parse_config(text)
    return build_trajectory(config, index, kind)


def run_ensemble(config: RunConfig, n_traj: int, workers: int = 1,
                 kind: str | None = None):
    """Run n_traj independent trajectories, optionally on a process pool.

    Returns (records, failures): records maps each completed index to its
    TrajectoryRecord, failures maps failed indices to the error message.
    The merged result is identical for any worker count.
    """
    if n_traj < 1:
        raise QtlError("n_traj must be >= 1")
    if kind is None:
        kind = config["strobe.system"] if config.mode == "strobe" else config.mode
    args = [(render_config(config), i, kind) for i in range(n_traj)]
    records: dict[int, TrajectoryRecord] = {}
    failures: dict[int, str] = {}
    if workers <= 1:
        for i, a in enumerate(args):
            try:
                records[i] = _ensemble_worker(a)
            except QtlError as exc:
                failures[i] = str(exc)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {i: pool.submit(_ensemble_worker, a)
                       for i, a in enumerate(args)}
            for i, fut in futures.items():
                try:
                    records[i] = fut.result()
                except QtlError as exc:
                    failures[i] = str(exc)
    return records, failures


def _lyapunov_backend(config: RunConfig):
    sp = config.system()
    dt = config["run.dt"]
    sample_every = config["run.sample_every"]
    if config["lyapunov.system"] == "quantum":
        return QuantumLyapunovConfig(
            params=sp, measure=config.measure(), grid=config.grid(),
            dt=dt, sigma0=config.init_sigma(), sample_every=sample_every)
    return ClassicalLyapunovConfig(
        params=sp, noise=config.noise(), dt=dt, sample_every=sample_every)


def _write_common(config: RunConfig, out: Path) -> None:
    io.atomic_write_text(out / "resolved_config.txt", render_config(config))


def _run_trajectory_mode(config: RunConfig, out: Path) -> str:
    kind = config.mode
    rec = build_trajectory(config, 0, kind)
    io.write_trajectory(out / "trajectory.csv", rec)
    if rec.record_t.size:
        io.write_record_raw(out / "record_raw.csv", rec)
        io.write_record_avg(out / "record_avg.csv", rec.avg_t, rec.avg_y)
    if config["output.figures"]:
        plots.save_phase_figure(out / "phase_space.png", rec)
        if kind == "quantum":
            plots.save_variance_figure(out / "variance.png", rec)
    if kind == "quantum":
        return f"max sqrt(V_x) = {np.sqrt(np.max(rec.var_x)):.6g} over t <= {rec.t[-1]:g}"
    return (f"final (x, p) = ({rec.mean_x[-1]:.6g}, {rec.mean_p[-1]:.6g}), "
            f"energy {rec.energy[-1]:.6g}")


def _run_strobe(config: RunConfig, out: Path, workers: int) -> str:
    n_traj = config["ensemble.n_traj"]
    records, failures = run_ensemble(config, n_traj, workers)
    points_by_run = []
    omega = config["system.omega"]
    for i in sorted(records):
        rec = records[i]
        io.write_trajectory(out / f"trajectory_{i:03d}.csv", rec)
        points_by_run.append(stroboscopic_map(
            rec, omega, config["strobe.phase"], config["strobe.t_skip"]))
    io.write_strobe(out / "strobe.csv", points_by_run)
    if config["output.figures"]:
        plots.save_strobe_figure(out / "strobe.png", points_by_run)
    n_pts = sum(len(p) for p in points_by_run)
    if failures:
        detail = "; ".join(f"trajectory {i}: {msg}" for i, msg in failures.items())
        raise NumericalError(
            f"{len(failures)}/{n_traj} trajectories failed ({detail}); "
            f"partial results kept in {out}")
    return f"{n_pts} strobe points from {n_traj} runs"


def _run_lyapunov(config: RunConfig, out: Path) -> str:
    res = lyapunov_estimate(config.branch(), _lyapunov_backend(config),
                            config.fit_window(), config.seed,
                            config["fit.weight"])
    io.write_lyapunov(out / "lyapunov.csv", res)
    if config["output.figures"]:
        plots.save_lyapunov_figure(out / "lyapunov.png", res)
    return f"lambda = {res.lam:.4f} +- {res.stderr:.4f} ({res.n_samples} instances)"


def _run_regime(config: RunConfig, out: Path) -> str:
    rep = regime_check(config.system(), config.measure(),
                       *config.regime_inputs())
    rows = [
        ("localization_lhs_8_eta_k", io._f(rep.loc_lhs), rep.localization),
        ("localization_rhs", io._f(rep.loc_rhs), rep.localization),
        ("noise_lo", io._f(rep.noise_lo), rep.noise),
        ("noise_mid_hbar_k", io._f(rep.noise_mid), rep.noise),
        ("noise_hi", io._f(rep.noise_hi), rep.noise),
        ("record_lhs_8_eta_k", io._f(rep.record_lhs), rep.record),
        ("record_rhs", io._f(rep.record_rhs), rep.record),
        ("k_min_record", io._f(rep.k_min_record), rep.record),
        ("action_over_hbar", io._f(rep.s), ""),
    ]
    text = "\n".join(["quantity,value,verdict"] +
                     [",".join(r) for r in rows]) + "\n"
    io.atomic_write_text(out / "regime.csv", text)
    return (f"localization {rep.localization}, noise {rep.noise}, "
            f"record {rep.record}; k_min(record) = {rep.k_min_record:.6g}")


def _run_sweep(config: RunConfig, out: Path) -> str:
    base = config.measure()
    quantum = config["lyapunov.system"] == "quantum"

    def system_for_k(k):
        mp = MeasureParams(hbar=base.hbar, k=k, eta=base.eta)
        backend = _lyapunov_backend(config)
        if quantum:
            return QuantumLyapunovConfig(
                params=backend.params, measure=mp, grid=backend.grid,
                dt=backend.dt, sigma0=backend.sigma0,
                sample_every=backend.sample_every)
        noise = matched_noise(mp, config["noise.vbar_x"])
        return ClassicalLyapunovConfig(
            params=backend.params, noise=noise, dt=backend.dt,
            sample_every=backend.sample_every)

    def measure_for_k(k):
        return MeasureParams(hbar=base.hbar, k=k, eta=base.eta)

    rows = k_sensitivity_sweep(config["sweep.k_values"], config.branch(),
                               system_for_k, config.regime_inputs(),
                               config.fit_window(), config.seed,
                               measure_for_k=measure_for_k)
    io.write_sweep(out / "sweep.csv", rows)
    for i, row in enumerate(rows):
        io.write_lyapunov(out / f"lyapunov_k{i:02d}.csv", row.result)
    if config["output.figures"]:
        plots.save_sweep_figure(out / "sweep.png", rows)
    summary = ", ".join(
        f"k={row.k:g}: {row.result.lam:.3f}+-{row.result.stderr:.3f}"
        + ("" if row.flatness == "ok" else f" [{row.flatness}]")
        for row in rows)
    return summary


def run(config: RunConfig, out_dir: str | None = None,
        workers: int | None = None) -> str:
    """Execute one configured run; returns the one-line summary.

    Output files are written atomically under the output directory.
    Raises ConfigError for configuration problems and LeakError /
    NumericalError for numerical failures (the CLI maps these to exit
    codes 2 and 3).
    """
    out = Path(out_dir if out_dir is not None else config["out"])
    out.mkdir(parents=True, exist_ok=True)
    workers = workers if workers is not None else config["workers"]
    _write_common(config, out)
    mode = config.mode
    if mode in ("quantum", "classical"):
        return _run_trajectory_mode(config, out)
    if mode == "strobe":
        return _run_strobe(config, out, workers)
    if mode == "lyapunov":
        return _run_lyapunov(config, out)
    if mode == "regime":
        return _run_regime(config, out)
    if mode == "sweep":
        return _run_sweep(config, out)
    raise QtlError(f"unhandled mode {mode!r}")

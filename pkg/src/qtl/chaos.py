"""Lyapunov exponents, stroboscopic maps, and record band-limiting.

The Lyapunov estimator follows a branch-and-track protocol: fiducial
trajectories are started in a small neighborhood of a common point; at a
set of branch points along each fiducial a neighbor is spawned — either
by switching to an independent noise substream (sharing the state
exactly) or by a small initial offset delta0 — and the pair is
co-evolved for a fixed tracking time.  ln Delta(tau) is averaged over
all instances; the slope over the fit window is the exponent.  No
renormalization is done: over a track time of 8 the separations stay far
below the attractor size for the systems of interest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import classical as _cl
from . import grid as _grid
from . import quantum as _q
from .errors import QtlError
from .record import TrajectoryRecord
from .rng import substream

OFFSET = "initial-offset"
NOISE = "noise-realization"


@dataclass(frozen=True)
class BranchProtocol:
    """Geometry of the branch-and-track estimate."""

    n_fiducial: int = 10
    start: tuple[float, float] = (-3.0, 8.0)
    start_dispersion: float = 0.1
    n_branch_points: int = 17
    branch_spacing: float = 20.0
    track_time: float = 8.0
    perturbation_mode: str = NOISE
    delta0: float = 1e-6

    def __post_init__(self):
        if self.n_fiducial < 1:
            raise QtlError("n_fiducial must be >= 1")
        if self.n_branch_points < 1:
            raise QtlError("n_branch_points must be >= 1")
        if self.perturbation_mode not in (OFFSET, NOISE):
            raise QtlError(f"unknown perturbation mode {self.perturbation_mode!r}")
        if self.perturbation_mode == OFFSET and self.delta0 <= 0:
            raise QtlError("initial-offset mode needs delta0 > 0")
        if self.n_branch_points > 1 and self.branch_spacing < self.track_time:
            import warnings
            warnings.warn("branch windows overlap (spacing < track time)")


@dataclass
class LyapunovResult:
    lam: float                    # maximal Lyapunov exponent, 1/time
    stderr: float
    tau: np.ndarray               # curve abscissa
    mean_ln_delta: np.ndarray     # curve ordinate, averaged over instances
    fit_window: tuple[float, float]
    n_samples: int                # number of (fiducial, branch) instances
    fiducial_slopes: np.ndarray = field(default_factory=lambda: np.empty(0))
    curve_stderr: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass(frozen=True)
class StrobePoint:
    period_index: int
    x: float
    p: float


@dataclass(frozen=True)
class ClassicalLyapunovConfig:
    """Classical backend for the estimator."""

    params: _q.SystemParams
    noise: _cl.NoiseSpec = _cl.NoiseSpec()
    dt: float = 1e-3
    sample_every: int = 10        # distance samples every sample_every * dt


@dataclass(frozen=True)
class QuantumLyapunovConfig:
    """Quantum backend: distances are measured between (<X>, <P>) pairs."""

    params: _q.SystemParams
    measure: _q.MeasureParams
    grid: _grid.Grid
    dt: float
    sigma0: float                 # initial wavepacket width
    sample_every: int = 10


def phase_distance(a: tuple[float, float], b: tuple[float, float],
                   w: float = 1.0) -> float:
    """sqrt(dx^2 + w dp^2); w weights the momentum direction."""
    return math.sqrt((a[0] - b[0]) ** 2 + w * (a[1] - b[1]) ** 2)


def fit_log_separation(tau: np.ndarray, ln_delta: np.ndarray,
                       fit_window: tuple[float, float]) -> float:
    """Least-squares slope of ln Delta over tau restricted to the window."""
    lo, hi = fit_window
    mask = (tau >= lo) & (tau <= hi)
    if np.count_nonzero(mask) < 2:
        raise QtlError("fit window contains fewer than two curve points")
    return float(np.polyfit(tau[mask], ln_delta[mask], 1)[0])


def _check_saturation(tau, curve, fit_window):
    # if the curve peaks before the fit window opens, the growth has
    # saturated and the window must be shrunk by the caller
    peak = tau[int(np.argmax(curve))]
    if peak < fit_window[0]:
        raise QtlError(
            f"separation saturates at tau={peak:.3g}, before the fit window")


def _finalize(tau, ln_curves_by_fid, fit_window, n_samples):
    """ln_curves_by_fid: (n_fid, n_tau) mean curve per fiducial."""
    ln_curves_by_fid = np.asarray(ln_curves_by_fid)
    mean_curve = np.mean(ln_curves_by_fid, axis=0)
    _check_saturation(tau, mean_curve, fit_window)
    slopes = np.array([fit_log_separation(tau, c, fit_window)
                       for c in ln_curves_by_fid])
    lam = float(np.mean(slopes))
    n_fid = len(slopes)
    stderr = float(np.std(slopes, ddof=1) / math.sqrt(n_fid)) if n_fid > 1 else 0.0
    curve_stderr = (np.std(ln_curves_by_fid, axis=0, ddof=1) / math.sqrt(n_fid)
                    if n_fid > 1 else np.zeros_like(mean_curve))
    return LyapunovResult(lam=lam, stderr=stderr, tau=tau,
                          mean_ln_delta=mean_curve, fit_window=fit_window,
                          n_samples=n_samples, fiducial_slopes=slopes,
                          curve_stderr=curve_stderr)


def _sample_disc(rng, center, radius, n):
    """Uniform points in a disc around center (x0, p0)."""
    r = radius * np.sqrt(rng.uniform(size=n))
    th = rng.uniform(0.0, 2.0 * math.pi, size=n)
    return center[0] + r * np.cos(th), center[1] + r * np.sin(th)


def _classical_lyapunov(proto: BranchProtocol, cfg: ClassicalLyapunovConfig,
                        fit_window, seed, w) -> LyapunovResult:
    dt, se = cfg.dt, cfg.sample_every
    track_steps = int(round(proto.track_time / dt))
    track_steps -= track_steps % se
    spacing_steps = int(round(proto.branch_spacing / dt))
    spacing_steps -= spacing_steps % se
    n_fid = proto.n_fiducial
    n_br = proto.n_branch_points
    total_steps = spacing_steps * (n_br - 1) + track_steps

    init_rng = substream(seed, 0)
    x0, p0 = _sample_disc(init_rng, proto.start, proto.start_dispersion, n_fid)

    noisy = not cfg.noise.is_zero
    normals = None
    if noisy:
        # one substream per fiducial, drawn up front so batching cannot
        # change the stream order
        normals = np.empty((total_steps, 2, n_fid))
        for f in range(n_fid):
            normals[:, :, f] = substream(seed, 1 + f).standard_normal((total_steps, 2))

    t0 = np.zeros(n_fid)
    _, _, _, xs, ps = _cl.leapfrog_batch(
        x0, p0, t0, total_steps, dt, cfg.params, cfg.noise, normals,
        snapshot_every=se)
    if not np.all(np.isfinite(xs)):
        raise QtlError("fiducial trajectory diverged")

    n_tau = track_steps // se
    tau = dt * se * np.arange(1, n_tau + 1)
    sum_ln = np.zeros((n_fid, n_tau))

    for b in range(n_br):
        i0 = b * spacing_steps            # step index of the branch point
        j0 = i0 // se                     # snapshot index
        bx, bp = xs[j0].copy(), ps[j0].copy()
        bt = np.full(n_fid, b * proto.branch_spacing)
        if proto.perturbation_mode == OFFSET:
            th = init_rng.uniform(0.0, 2.0 * math.pi, size=n_fid)
            bx = bx + proto.delta0 * np.cos(th)
            bp = bp + proto.delta0 * np.sin(th)
            br_normals = None
            if noisy:
                br_normals = np.empty((track_steps, 2, n_fid))
                for f in range(n_fid):
                    br_normals[:, :, f] = substream(seed, 1 + f, 1 + b).standard_normal(
                        (track_steps, 2))
        else:
            if not noisy:
                raise QtlError("noise-realization mode requires nonzero noise")
            br_normals = np.empty((track_steps, 2, n_fid))
            for f in range(n_fid):
                br_normals[:, :, f] = substream(seed, 1 + f, 1 + b).standard_normal(
                    (track_steps, 2))
        _, _, _, nxs, nps = _cl.leapfrog_batch(
            bx, bp, bt, track_steps, dt, cfg.params, cfg.noise, br_normals,
            snapshot_every=se)
        dxs = nxs[1:] - xs[j0 + 1: j0 + 1 + n_tau]
        dps = nps[1:] - ps[j0 + 1: j0 + 1 + n_tau]
        delta = np.sqrt(dxs**2 + w * dps**2)
        if np.all(delta == 0.0):
            raise QtlError("zero separation everywhere: identical streams")
        sum_ln += np.log(delta).T

    return _finalize(tau, sum_ln / n_br, fit_window, n_fid * n_br)


def _quantum_lyapunov(proto: BranchProtocol, cfg: QuantumLyapunovConfig,
                      fit_window, seed, w) -> LyapunovResult:
    if proto.perturbation_mode != NOISE:
        raise QtlError("quantum branching diverges the noise substream; "
                       "initial-offset mode is a classical-only option")
    dt, se = cfg.dt, cfg.sample_every
    mp = cfg.measure
    if mp.k <= 0:
        raise QtlError("quantum Lyapunov estimation needs k > 0")
    track_steps = int(round(proto.track_time / dt))
    track_steps -= track_steps % se
    spacing_steps = int(round(proto.branch_spacing / dt))
    spacing_steps -= spacing_steps % se
    n_fid = proto.n_fiducial
    n_br = proto.n_branch_points

    init_rng = substream(seed, 0)
    x0, p0 = _sample_disc(init_rng, proto.start, proto.start_dispersion, n_fid)
    amps = np.stack([
        _grid.init_gaussian(cfg.grid, x0[f], p0[f], cfg.sigma0, mp.hbar).amplitudes
        for f in range(n_fid)])

    n_tau = track_steps // se
    tau = dt * se * np.arange(1, n_tau + 1)
    sum_ln = np.zeros((n_fid, n_tau))
    sqrt_dt = math.sqrt(dt)

    fid_rngs = [substream(seed, 1 + f) for f in range(n_fid)]
    t = 0.0
    for b in range(n_br):
        # branch: clone states, diverge only the noise substream
        branch_amps = amps.copy()
        br_dWs = np.empty((track_steps, n_fid))
        for f in range(n_fid):
            br_dWs[:, f] = sqrt_dt * substream(seed, 1 + f, 1 + b).standard_normal(
                track_steps)
        _, nbx, nbp = _q.evolve_ensemble(
            branch_amps, cfg.grid, t, track_steps, dt, cfg.params, mp,
            br_dWs, se)

        # fiducials continue on their own streams; the first track_time of
        # this segment doubles as the comparison series
        seg_steps = spacing_steps if b < n_br - 1 else track_steps
        fid_dWs = np.empty((seg_steps, n_fid))
        for f in range(n_fid):
            fid_dWs[:, f] = sqrt_dt * fid_rngs[f].standard_normal(seg_steps)
        amps, fx, fp = _q.evolve_ensemble(
            amps, cfg.grid, t, seg_steps, dt, cfg.params, mp, fid_dWs, se)

        delta = np.sqrt((nbx[1:n_tau + 1] - fx[1:n_tau + 1]) ** 2
                        + w * (nbp[1:n_tau + 1] - fp[1:n_tau + 1]) ** 2)
        if np.all(delta == 0.0):
            raise QtlError("zero separation everywhere: identical streams")
        sum_ln += np.log(delta).T
        t += seg_steps * dt

    return _finalize(tau, sum_ln / n_br, fit_window, n_fid * n_br)


def lyapunov_estimate(proto: BranchProtocol,
                      system: ClassicalLyapunovConfig | QuantumLyapunovConfig,
                      fit_window: tuple[float, float] = (1.0, 6.0),
                      seed: int = 0, weight: float = 1.0) -> LyapunovResult:
    """Maximal Lyapunov exponent by the branch-and-track protocol.

    Per-fiducial slopes are fitted over ``fit_window`` and reported as
    mean +/- standard error; the averaged ln Delta(tau) curve is kept on
    the result so the fit is auditable.
    """
    if not (0.0 <= fit_window[0] < fit_window[1] <= proto.track_time):
        raise QtlError("fit window must lie within [0, track_time]")
    if isinstance(system, ClassicalLyapunovConfig):
        return _classical_lyapunov(proto, system, fit_window, seed, weight)
    if isinstance(system, QuantumLyapunovConfig):
        return _quantum_lyapunov(proto, system, fit_window, seed, weight)
    raise QtlError(f"unknown system configuration {type(system).__name__}")


def stroboscopic_map(record: TrajectoryRecord, omega: float, phase: float = 0.0,
                     t_skip: float = 0.0) -> list[StrobePoint]:
    """Phase-space samples once per drive period at fixed drive phase.

    (x, p) — or (<X>, <P>) — are linearly interpolated to the strobe
    times t_n = t_skip + n 2 pi / omega + phase that fall inside the
    record.
    """
    if omega <= 0:
        raise QtlError("omega must be positive")
    t = record.t
    if t.size < 2:
        raise QtlError("record too short to strobe")
    if t_skip >= t[-1] - t[0]:
        raise QtlError("record shorter than t_skip")
    period = 2.0 * math.pi / omega
    t0, t1 = t[0] + t_skip + (phase % period), t[-1]
    n_pts = int(math.floor((t1 - t0) / period)) + 1
    strobe_t = t0 + period * np.arange(n_pts)
    xs = np.interp(strobe_t, t, record.mean_x)
    ps = np.interp(strobe_t, t, record.mean_p)
    return [StrobePoint(i, float(xs[i]), float(ps[i])) for i in range(n_pts)]


def band_limit_record(t: np.ndarray, y: np.ndarray, window: float,
                      dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Non-overlapping boxcar means of a raw record.

    ``window`` must be an integer multiple of the record step ``dt``;
    output samples are timestamped at the window centers.  Trailing
    samples that do not fill a window are dropped.
    """
    ratio = window / dt
    n_per = int(round(ratio))
    if n_per < 1 or abs(ratio - n_per) > 1e-9 * max(1.0, ratio):
        raise QtlError(f"window {window} is not an integer multiple of dt {dt}")
    n_win = t.size // n_per
    if n_win == 0:
        return np.empty(0), np.empty(0)
    tt = t[: n_win * n_per].reshape(n_win, n_per)
    yy = y[: n_win * n_per].reshape(n_win, n_per)
    return tt.mean(axis=1), yy.mean(axis=1)


@dataclass
class SweepRow:
    k: float
    result: LyapunovResult
    flatness: str                 # "ok" | "flattened"


def k_sensitivity_sweep(k_values, proto: BranchProtocol, system_for_k,
                        regime_inputs: tuple[dict, dict],
                        fit_window: tuple[float, float] = (1.0, 6.0),
                        seed: int = 0, measure_for_k=None) -> list[SweepRow]:
    """Repeat the Lyapunov estimate across measurement strengths.

    ``system_for_k(k)`` builds the estimator backend (quantum or
    classical with matched noise) for one measurement strength; each k
    must pass the regime check at least marginally (``regime_inputs`` =
    (traj_stats, record_spec)).  For classical backends — which carry no
    measurement parameters of their own — ``measure_for_k(k)`` supplies
    the MeasureParams to check against.  The flatness diagnostic flags
    curves whose growth has stalled in the second half of the fit window
    — the signature of noise washing out the linear region.
    """
    traj_stats, record_spec = regime_inputs
    rows = []
    for k in k_values:
        sys_k = system_for_k(float(k))
        if measure_for_k is not None:
            mp = measure_for_k(float(k))
        elif isinstance(sys_k, QuantumLyapunovConfig):
            mp = sys_k.measure
        else:
            raise QtlError("classical sweep backends need measure_for_k")
        rep = _q.regime_check(sys_k.params, mp, traj_stats, record_spec)
        if not rep.at_least_marginal:
            raise QtlError(f"k={k:g} fails the regime check")
        res = lyapunov_estimate(proto, sys_k, fit_window, seed)
        mid = 0.5 * (fit_window[0] + fit_window[1])
        late = fit_log_separation(res.tau, res.mean_ln_delta, (mid, fit_window[1]))
        flat = "flattened" if late < 0.5 * res.lam else "ok"
        rows.append(SweepRow(k=float(k), result=res, flatness=flat))
    return rows

"""Classical comparison dynamics: leapfrog plus weak additive white noise.

The deterministic part is kick-drift-kick leapfrog (symplectic, so long
chaotic runs have no secular energy drift); the stochastic part adds
independent white-noise increments to x and p after each step.  The
default noise amplitudes are matched to the quantum back-action scale
via :func:`matched_noise`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import QtlError
from .quantum import MeasureParams, SystemParams, force, potential
from .record import TrajectoryRecord
from .rng import substream


@dataclass(frozen=True)
class ClassicalState:
    x: float
    p: float
    t: float = 0.0


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white-noise amplitudes, units per sqrt(time)."""

    sigma_x: float = 0.0
    sigma_p: float = 0.0

    def __post_init__(self):
        if self.sigma_x < 0 or self.sigma_p < 0:
            raise QtlError("noise amplitudes must be non-negative")

    @property
    def is_zero(self) -> bool:
        return self.sigma_x == 0.0 and self.sigma_p == 0.0


def matched_noise(mp: MeasureParams, vbar_x: float) -> NoiseSpec:
    """Noise amplitudes matched to the measurement back-action.

    sigma_p = hbar sqrt(2k) reproduces the momentum-variance pumping
    rate hbar^2 k of the measurement; sigma_x = sqrt(2k) vbar_x matches
    the conditioned-mean position noise at a steady-state position
    variance vbar_x (take it from a calibration run, or override).
    """
    if vbar_x < 0:
        raise QtlError("vbar_x must be non-negative")
    root = math.sqrt(2.0 * mp.k)
    return NoiseSpec(sigma_x=root * vbar_x, sigma_p=mp.hbar * root)


def classical_step(s: ClassicalState, dt: float, p: SystemParams,
                   ns: NoiseSpec = NoiseSpec(),
                   rng_draws: tuple[float, float] | None = None) -> ClassicalState:
    """One kick-drift-kick step, then the additive noise increments.

    The force is evaluated at the start and end times of the step (the
    time-symmetric leapfrog form, reversible for zero noise).
    ``rng_draws`` are two standard normals; required when noise is on.
    """
    if dt == 0:
        raise QtlError("dt must be nonzero")
    p_half = s.p + 0.5 * dt * force(s.x, s.t, p)
    x_new = s.x + dt * p_half / p.m
    t_new = s.t + dt
    p_new = p_half + 0.5 * dt * force(x_new, t_new, p)
    if not ns.is_zero:
        if rng_draws is None:
            raise QtlError("noise is on but no rng draws were supplied")
        root_dt = math.sqrt(abs(dt))
        x_new += ns.sigma_x * root_dt * rng_draws[0]
        p_new += ns.sigma_p * root_dt * rng_draws[1]
    return ClassicalState(x_new, p_new, t_new)


def leapfrog_batch(x: np.ndarray, p_arr: np.ndarray, t: np.ndarray, n_steps: int,
                   dt: float, params: SystemParams, ns: NoiseSpec = NoiseSpec(),
                   normals: np.ndarray | None = None,
                   snapshot_every: int = 0) -> tuple:
    """Vectorized stepping of many trajectories at once.

    Each trajectory carries its own time (they may be at different drive
    phases).  ``normals`` must have shape (n_steps, 2, len(x)) when noise
    is on.  With snapshot_every > 0, returns (x, p, t, xs, ps) where
    xs/ps have shape (n_snapshots+1, len(x)) including the initial state;
    otherwise returns (x, p, t).
    """
    x = np.array(x, dtype=float)
    p_arr = np.array(p_arr, dtype=float)
    t = np.array(t, dtype=float)
    noisy = not ns.is_zero
    if noisy and normals is None:
        raise QtlError("noise is on but no normals were supplied")
    root_dt = math.sqrt(dt)
    keep = snapshot_every > 0
    if keep:
        n_snap = n_steps // snapshot_every
        xs = np.empty((n_snap + 1, x.size))
        ps = np.empty((n_snap + 1, x.size))
        xs[0], ps[0] = x, p_arr
    # overflow during divergence is expected: the runner turns the
    # resulting non-finite values into NumericalError
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            p_half = p_arr + 0.5 * dt * force(x, t, params)
            x = x + dt * p_half / params.m
            t = t + dt
            p_arr = p_half + 0.5 * dt * force(x, t, params)
            if noisy:
                x = x + ns.sigma_x * root_dt * normals[i, 0]
                p_arr = p_arr + ns.sigma_p * root_dt * normals[i, 1]
            if keep and (i + 1) % snapshot_every == 0:
                j = (i + 1) // snapshot_every
                xs[j], ps[j] = x, p_arr
    if keep:
        return x, p_arr, t, xs, ps
    return x, p_arr, t


def run_classical_trajectory(init: ClassicalState, T: float, dt: float,
                             p: SystemParams, ns: NoiseSpec = NoiseSpec(),
                             seed: int = 0, sample_every: int = 1,
                             stream_path: tuple[int, ...] = ()) -> TrajectoryRecord:
    """Integrate one classical trajectory for total time T.

    Deterministic given (seed, stream_path); zero-noise runs never touch
    the generator, so they are seed-independent.  Divergence to infinity
    raises NumericalError.
    """
    from .errors import NumericalError

    if T <= 0:
        raise QtlError("T must be positive")
    n_steps = int(round(T / dt))
    if sample_every < 1 or n_steps % sample_every != 0:
        raise QtlError("sample_every must divide the step count")

    normals = None
    if not ns.is_zero:
        rng = substream(seed, *stream_path)
        normals = rng.standard_normal((n_steps, 2, 1))

    _, _, _, xs, ps = leapfrog_batch(
        np.array([init.x]), np.array([init.p]), np.array([init.t]),
        n_steps, dt, p, ns, normals, snapshot_every=sample_every)
    xs, ps = xs[:, 0], ps[:, 0]
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ps))):
        raise NumericalError("classical trajectory diverged")

    t = init.t + dt * sample_every * np.arange(xs.size)
    energy = ps**2 / (2.0 * p.m) + potential(xs, t, p)
    zeros = np.zeros_like(xs)
    return TrajectoryRecord(
        kind="classical", seed=seed,
        t=t, mean_x=xs, mean_p=ps,
        var_x=zeros, var_p=zeros, cov_xp=zeros,
        norm=np.ones_like(xs), energy=energy,
    )


def estimate_typical_action(p: SystemParams, x0: float = -3.0, p0: float = 8.0,
                            dt: float = 1e-4) -> float:
    """Typical action from one drive period of a noiseless classical run.

    Computes |closed-path integral of p dx| / (2 pi) = |integral of
    p^2/m dt| / (2 pi) over one period 2 pi/omega — the action-variable
    normalization keeps the result on the scale of the enclosed
    phase-space area.  Exposed so callers can override it entirely.
    """
    if p.omega <= 0:
        raise QtlError("typical-action estimate needs a driven system")
    period = 2.0 * math.pi / p.omega
    n_steps = int(round(period / dt))
    _, _, _, _, ps = leapfrog_batch(
        np.array([x0]), np.array([p0]), np.array([0.0]),
        n_steps, dt, p, snapshot_every=1)
    return float(np.sum(ps[:, 0] ** 2) * dt / p.m / (2.0 * math.pi))

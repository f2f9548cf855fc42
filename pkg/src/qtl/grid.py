"""Spatial grid, conditioned wavefunction, and spectral phase-space moments.

The wavefunction lives on a uniform periodic lattice; all derivatives and
momentum-space quantities are computed with the FFT.  The lattice is
periodic by construction, so a state that reaches the boundary would wrap
around silently — an edge-mass guard turns that into a hard error instead
(see :class:`~qtl.errors.LeakError`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as _fft

from .errors import LeakError, QtlError

#: fraction of the grid, per side, counted as "edge" by the leak guard
EDGE_FRACTION = 0.01
#: edge probability mass above which a state is considered leaked
DEFAULT_LEAK_THRESHOLD = 1e-10


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic position lattice and its conjugate momentum lattice.

    ``k`` holds the angular wavenumbers 2*pi*j/(n*dx) in standard FFT
    ordering (negative frequencies in the upper half); momentum values
    are ``hbar * k``.
    """

    x_min: float
    x_max: float
    n: int
    x: np.ndarray = field(repr=False, compare=False)
    k: np.ndarray = field(repr=False, compare=False)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.x_min, self.x_max, self.n) == (other.x_min, other.x_max, other.n)


@dataclass
class WaveState:
    """Conditioned pure state |psi(t)> sampled on a grid.

    Amplitudes carry units length^{-1/2}; the norm is sum |psi|^2 dx.
    """

    grid: Grid
    amplitudes: np.ndarray
    t: float = 0.0

    def copy(self) -> "WaveState":
        return WaveState(self.grid, self.amplitudes.copy(), self.t)


@dataclass(frozen=True)
class Moments:
    """Instantaneous phase-space moments of a state."""

    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    cov_xp: float
    norm: float
    energy: float
    t: float


def make_grid(x_min: float, x_max: float, n: int) -> Grid:
    """Build a periodic grid with n points on [x_min, x_max).

    n must be a power of two >= 16 (keeps the FFT on its fastest radix
    path; this is enforced rather than silently padded).
    """
    if x_max <= x_min:
        raise QtlError(f"degenerate interval [{x_min}, {x_max}]")
    if n < 16 or (n & (n - 1)) != 0:
        raise QtlError(f"n must be a power of two >= 16, got {n}")
    dx = (x_max - x_min) / n
    x = x_min + dx * np.arange(n)
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    return Grid(x_min=x_min, x_max=x_max, n=n, x=x, k=k)


def suggest_grid_points(x_min: float, x_max: float, expected_width: float) -> int:
    """Smallest valid point count with dx <= expected_width / 5.

    The caller is responsible for choosing a domain spanning at least
    1.5x the classical turning points at the configured energy.
    """
    if expected_width <= 0:
        raise QtlError("expected_width must be positive")
    n = 16
    while (x_max - x_min) / n > expected_width / 5.0:
        n *= 2
    return n


def init_gaussian(grid: Grid, x0: float, p0: float, sigma: float, hbar: float) -> WaveState:
    """Normalized minimum-uncertainty Gaussian centered at (x0, p0).

    psi(x) ~ exp(-(x - x0)^2 / (4 sigma^2) + i p0 x / hbar), so
    var_x = sigma^2 and var_p = hbar^2 / (4 sigma^2).
    """
    margin = 0.1 * grid.length
    if not (grid.x_min + margin <= x0 <= grid.x_max - margin):
        raise QtlError(f"x0={x0} outside the inner 80% of the grid")
    if sigma < 4.0 * grid.dx:
        raise QtlError(f"sigma={sigma} unresolved by grid (dx={grid.dx:.3e})")
    psi = np.exp(-((grid.x - x0) ** 2) / (4.0 * sigma**2) + 1j * p0 * grid.x / hbar)
    state = WaveState(grid, psi.astype(np.complex128), t=0.0)
    return normalize(state)


def norm(state: WaveState) -> float:
    """Total probability sum |psi|^2 dx."""
    a = state.amplitudes
    return float(np.real(np.vdot(a, a)) * state.grid.dx)


def normalize(state: WaveState) -> WaveState:
    """Rescale to unit norm; the global phase is untouched."""
    nrm = norm(state)
    if nrm <= 0.0:
        raise QtlError("cannot normalize a zero-norm state")
    return WaveState(state.grid, state.amplitudes / np.sqrt(nrm), state.t)


def edge_mass(state: WaveState) -> float:
    """Probability mass in the outer 2% of grid points (1% per side)."""
    n_edge = max(1, int(EDGE_FRACTION * state.grid.n))
    a = state.amplitudes
    m = np.sum(np.abs(a[:n_edge]) ** 2) + np.sum(np.abs(a[-n_edge:]) ** 2)
    return float(m * state.grid.dx)


def check_leak(state: WaveState, threshold: float = DEFAULT_LEAK_THRESHOLD) -> None:
    """Raise LeakError if the edge-mass invariant is violated."""
    m = edge_mass(state)
    if m > threshold:
        raise LeakError(m, state.t)


def mean_position(state: WaveState) -> float:
    """<X> alone; cheap enough to evaluate every step."""
    prob = np.abs(state.amplitudes) ** 2
    return float(np.dot(prob, state.grid.x) * state.grid.dx)


def moments(state: WaveState, params, hbar: float,
            leak_threshold: float = DEFAULT_LEAK_THRESHOLD) -> Moments:
    """All phase-space moments of a normalized state.

    Position moments are direct lattice sums; momentum moments use the
    FFT and Parseval; cov_xp = Re<X P> - <X><P>, which equals the
    symmetrized covariance for pure states.  ``params`` supplies the
    Hamiltonian (for the energy term); hbar converts wavenumbers to
    momenta.

    Raises LeakError for a state with edge mass above the threshold.
    """
    check_leak(state, leak_threshold)
    g = state.grid
    a = state.amplitudes

    prob = np.abs(a) ** 2 * g.dx
    nrm = float(np.sum(prob))
    mean_x = float(np.dot(prob, g.x))
    var_x = float(np.dot(prob, (g.x - mean_x) ** 2))

    phi = _fft.fft(a)
    wk = np.abs(phi) ** 2 * (g.dx / g.n)  # Parseval weights, sum = norm
    p_lattice = hbar * g.k
    mean_p = float(np.dot(wk, p_lattice))
    mean_p2 = float(np.dot(wk, p_lattice**2))
    var_p = mean_p2 - mean_p**2

    p_psi = _fft.ifft(p_lattice * phi)
    cov_xp = float(np.real(np.sum(np.conj(a) * g.x * p_psi)) * g.dx) - mean_x * mean_p

    v = params.potential(g.x, state.t)
    energy = mean_p2 / (2.0 * params.m) + float(np.dot(prob, v))

    return Moments(
        mean_x=mean_x,
        mean_p=mean_p,
        var_x=var_x,
        var_p=var_p,
        cov_xp=cov_xp,
        norm=nrm,
        energy=energy,
        t=state.t,
    )

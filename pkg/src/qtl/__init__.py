"""Continuously measured quantum double well and its classical shadow.

Library layers:

* :mod:`qtl.grid` — spatial lattice, wavefunction, spectral moments
* :mod:`qtl.quantum` — split-operator stochastic evolution, regime checks
* :mod:`qtl.classical` — leapfrog dynamics with matched weak noise
* :mod:`qtl.chaos` — Lyapunov estimation, stroboscopic maps, band-limiting
* :mod:`qtl.config` / :mod:`qtl.harness` / :mod:`qtl.cli` — configured,
  seeded, optionally parallel runs with CSV and figure output
"""

from .chaos import (BranchProtocol, ClassicalLyapunovConfig, LyapunovResult,
                    QuantumLyapunovConfig, StrobePoint, band_limit_record,
                    fit_log_separation, k_sensitivity_sweep, lyapunov_estimate,
                    phase_distance, stroboscopic_map)
from .classical import (ClassicalState, NoiseSpec, classical_step,
                        estimate_typical_action, matched_noise,
                        run_classical_trajectory)
from .config import RunConfig, parse_config, render_config
from .errors import ConfigError, LeakError, NumericalError, QtlError
from .grid import (Grid, Moments, WaveState, init_gaussian, make_grid, moments,
                   norm, normalize, suggest_grid_points)
from .harness import run, run_ensemble
from .quantum import (MeasureParams, RegimeReport, StepOutcome, SystemParams,
                      force, measurement_update, potential, regime_check,
                      run_quantum_trajectory, sse_step, suggest_dt,
                      unitary_half_step)
from .record import TrajectoryRecord
from .rng import substream

__version__ = "0.1.0"

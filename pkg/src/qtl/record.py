"""Trajectory output container shared by the quantum and classical runners."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TrajectoryRecord:
    """Sampled time series of one trajectory plus its measurement record.

    For classical runs the mean_x/mean_p columns hold (x, p), the
    variance columns are zero, norm is 1 and energy is the classical
    energy.  ``record_t``/``record_y`` hold the raw per-step measurement
    record (empty when k = 0 or for noiseless classical runs);
    ``avg_t``/``avg_y`` hold the band-limited record when one was
    requested.
    """

    kind: str                    # "quantum" | "classical"
    seed: int
    fingerprint: str = ""        # hash of the producing RunConfig, "" for library use
    t: np.ndarray = field(default_factory=lambda: np.empty(0))
    mean_x: np.ndarray = field(default_factory=lambda: np.empty(0))
    mean_p: np.ndarray = field(default_factory=lambda: np.empty(0))
    var_x: np.ndarray = field(default_factory=lambda: np.empty(0))
    var_p: np.ndarray = field(default_factory=lambda: np.empty(0))
    cov_xp: np.ndarray = field(default_factory=lambda: np.empty(0))
    norm: np.ndarray = field(default_factory=lambda: np.empty(0))
    energy: np.ndarray = field(default_factory=lambda: np.empty(0))
    record_t: np.ndarray = field(default_factory=lambda: np.empty(0))
    record_y: np.ndarray = field(default_factory=lambda: np.empty(0))
    avg_t: np.ndarray = field(default_factory=lambda: np.empty(0))
    avg_y: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        if len(self.t) > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("trajectory times must be strictly increasing")

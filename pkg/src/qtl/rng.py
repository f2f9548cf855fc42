"""Deterministic random-number substreams.

All stochastic code in the package draws from generators produced by
:func:`substream`.  The splitting scheme is: a 64-bit master seed plus a
path of non-negative integer indices (trajectory index, branch index,
...) is fed to ``numpy.random.SeedSequence(entropy=seed, spawn_key=path)``
and drives a Philox counter-based generator.  Two consequences:

* the same (seed, path) always yields the same stream, on any machine
  and regardless of how work is scheduled across processes;
* distinct paths yield statistically independent streams, so
  trajectories and branches may run in parallel without coordination.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return the generator for the given master seed and index path."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if any(i < 0 for i in path):
        raise ValueError("substream indices must be non-negative")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(ss))


def wiener_increments(rng: np.random.Generator, dt: float, n: int) -> np.ndarray:
    """Draw n Wiener increments dW ~ N(0, dt)."""
    return rng.standard_normal(n) * np.sqrt(dt)

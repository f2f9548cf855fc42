"""Exception hierarchy shared across the package."""


class QtlError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(QtlError):
    """Invalid configuration text or values.

    Carries the 1-based line number of the offending entry when the
    error can be attributed to a single line (None otherwise).
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LeakError(QtlError):
    """Probability mass reached the edge of the spatial grid.

    The periodic spectral representation would silently wrap the state
    around; this error converts that into a hard failure.
    """

    def __init__(self, edge_mass, t):
        self.edge_mass = edge_mass
        self.t = t
        super().__init__(
            f"wavefunction leaked to grid edge (edge mass {edge_mass:.3e}) at t={t:.6g}"
        )


class NumericalError(QtlError):
    """Divergence or other numerical failure during a run."""

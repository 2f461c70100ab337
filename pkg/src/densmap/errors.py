"""Exception types raised by densmap."""


class DensmapError(Exception):
    """Base class for all errors raised by this package."""


class GridError(DensmapError, ValueError):
    """Invalid grid parameters or a field that does not live on the grid."""


class WaveFunctionError(DensmapError, ValueError):
    pass


class NumericalFailure(DensmapError, RuntimeError):
    """A linear solve or eigensolve failed, or NaNs appeared."""


class DegenerateWeight(DensmapError, ValueError):
    """The Sturm-Liouville weight is too small at some half-grid point."""


class IncompatibleRHS(DensmapError, ValueError):
    """Periodic right-hand side does not integrate to zero."""


class IncompatibleInitialState(DensmapError, ValueError):
    """Target density does not match the initial state at t = 0."""


class ConfigError(DensmapError, ValueError):
    """Invalid run configuration (unknown key, bad value)."""

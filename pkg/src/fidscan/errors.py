"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
the most specific class that applies rather than a bare RuntimeError.
"""


class FidscanError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FidscanError, ValueError):
    """Invalid user-supplied configuration (bad key, bad value, bad combination)."""


class CapacityError(FidscanError):
    """Requested problem size exceeds what a code path supports (e.g. ED beyond L=12)."""


class ConvergenceError(FidscanError):
    """An iterative eigensolve failed to reach its tolerance within the iteration cap."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class IncompatibleRecordsError(FidscanError, ValueError):
    """Two ground-state records cannot be compared (different L, m, or sweep schedule)."""


class CheckpointFormatError(FidscanError, ValueError):
    """A checkpoint file is corrupt or has an unsupported layout version."""

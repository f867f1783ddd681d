"""Exception types shared across the package."""


class SeapackError(Exception):
    """Base class for all package errors."""


class ParameterError(SeapackError, ValueError):
    """A physical or configuration parameter is out of its valid range."""


class SingularOrientationError(SeapackError, ValueError):
    """Euler-rate transform requested at a pitch singularity."""


class UndefinedHeadingError(SeapackError, ValueError):
    """Heading requested for a zero horizontal velocity."""


class OutOfBoundsError(SeapackError, ValueError):
    """A query point lies outside the gridded map."""


class DimensionError(SeapackError, ValueError):
    """An array argument has an incompatible shape."""


class ConfigError(SeapackError, ValueError):
    """A scenario configuration file is malformed.

    Carries the offending key and, when recoverable, the line number.
    """

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


class SamplingExhaustedError(SeapackError, RuntimeError):
    """Rejection sampling failed to find a feasible point."""


class InfeasibleProgramError(SeapackError, RuntimeError):
    """A convex subproblem was certified infeasible."""

"""Exception hierarchy and CLI exit codes."""

from __future__ import annotations

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4


class NnidError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = EXIT_CONFIG


class DimensionError(NnidError):
    """Input dimensions violate an operation's requirements."""


class DomainError(NnidError):
    """A parameter or value lies outside its legal domain."""


class BinningMismatchError(NnidError):
    """Two histograms with different binning layouts were combined."""


class BoundsError(NnidError):
    """A rectangle query falls outside the indexed area."""


class ConfigurationError(NnidError):
    """A composite operator was assembled with an invalid configuration."""


class NumericalError(NnidError):
    """A computation produced a non-finite intermediate value."""

    exit_code = EXIT_DATA


class ResourceError(NnidError):
    """An allocation would exceed the configured memory budget."""

    exit_code = EXIT_DATA


class DataError(NnidError):
    """An input file is missing, undecodable, or inconsistent."""

    exit_code = EXIT_DATA


class CapacityError(NnidError):
    """A request exceeds what the input can provide (payload, entries)."""

    exit_code = EXIT_DATA


class SampleSizeError(NnidError):
    """Too few samples for a statistically meaningful evaluation."""

    exit_code = EXIT_DATA


class ConvergenceError(NnidError):
    """An iterative search failed to converge within its budget."""

    exit_code = EXIT_CONVERGENCE


class InfeasibleTargetError(ConvergenceError):
    """A calibration target cannot be bracketed within the payload ceiling."""


class DetectorError(NnidError):
    """An external detector failed, timed out, or produced unparsable output."""

    exit_code = EXIT_CONVERGENCE

"""Exception hierarchy for nvspec.

Every error carries the process exit code the command line reports for it.
"""

from __future__ import annotations


class NvSpecError(RuntimeError):
    """Base class for all nvspec failures."""

    exit_code: int = 1


class InputError(NvSpecError, ValueError):
    """Raised when data or arguments are malformed."""

    exit_code = 2


class DomainError(InputError):
    """Raised when a value lies outside the domain of a function."""


class DegenerateProfileError(InputError):
    """Raised when a line profile has neither Gaussian nor Lorentzian width."""


class ModeMismatchError(InputError):
    """Raised when a FWHM convention is applied to parameters it does not cover."""


class ScanFormatError(InputError):
    """Raised when a scan file cannot be parsed."""

    def __init__(self, message: str, *, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        location = ""
        if path is not None:
            location = f"{path}:"
        if line is not None:
            location = f"{location}{line}:"
        super().__init__(f"{location} {message}".strip() if location else message)


class InsufficientDataError(InputError):
    """Raised when an operation needs more points than it was given."""


class NoSignalError(InputError):
    """Raised when a fit is requested on data without any signal."""


class BinMismatchError(InputError):
    """Raised when two histograms do not share the same edges."""


class ConfigurationError(InputError):
    """Raised when a run configuration is incomplete or inconsistent."""


class InfeasibleParametersError(NvSpecError):
    """Raised when parameters are valid individually but admit no solution."""

    exit_code = 3


class CapacityError(InfeasibleParametersError):
    """Raised when more charges are requested than traps exist."""


class BroadeningTooSmallError(InfeasibleParametersError):
    """Raised when the broadening fraction is below what the line shape can express."""


class RangeError(InfeasibleParametersError):
    """Raised when a calibration target cannot be reached."""


class NumericalError(NvSpecError):
    """Raised when a numerical procedure fails to deliver the requested accuracy."""

    exit_code = 4


class QuadratureError(NumericalError):
    """Raised when an integral does not converge to the requested tolerance."""

    def __init__(
        self, message: str, *, estimate: float = float("nan"), error: float = float("nan")
    ):
        self.estimate = estimate
        self.error = error
        super().__init__(message)


class FitFailedError(NumericalError):
    """Raised when a fit that must succeed does not."""

    def __init__(self, message: str, *, details: dict[str, float] | None = None):
        self.details = details or {}
        super().__init__(message)


class EmptyEnsembleError(NumericalError):
    """Raised when every member of a Monte Carlo ensemble was rejected."""

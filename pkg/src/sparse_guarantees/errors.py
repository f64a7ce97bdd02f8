"""
Exception hierarchy for the sparse-estimation guarantee toolkit

InputError subclasses signal invalid arguments or configuration (CLI exit
code 1); SolverError subclasses signal numerical failures (CLI exit code 2).
"""


class SparseGuaranteesError(Exception):
    """Base exception for all toolkit errors."""
    pass


class InputError(SparseGuaranteesError):
    """Invalid input, parameter or configuration."""
    pass


class SolverError(SparseGuaranteesError):
    """A numerical routine could not produce a certified result."""
    pass


class EmptyInputError(InputError):
    pass


class NotSymmetricError(InputError):
    pass


class NotPowerOfTwoError(InputError):
    pass


class TooFewAtomsError(InputError):
    pass


class IndexOutOfRangeError(InputError):
    pass


class DuplicateIndexError(InputError):
    pass


class EnumerationTooLargeError(InputError):
    """The exhaustive subset enumeration exceeds the configured cap."""
    pass


class NonPositiveGammaError(InputError):
    pass


class NonPositiveSigmaError(InputError):
    pass


class InvalidSpecError(InputError):
    """A signal or experiment specification is inconsistent."""
    pass


class ConfigError(InputError):
    """A config file is missing, unreadable or does not match its schema."""
    pass


class RankDeficientError(SolverError):
    """A subdictionary handed to least squares is numerically rank deficient."""
    pass


class NoConvergenceError(SolverError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message: str, iterations: int = 0):
        super().__init__(message)
        self.iterations = iterations


class InfeasibleError(SolverError):
    pass

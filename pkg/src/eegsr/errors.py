"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: data problems exit 3, numeric and
training failures exit 4.
"""


class EegsrError(Exception):
    exit_code = 1


class ParameterError(EegsrError, ValueError):
    """Invalid argument value or shape."""

    exit_code = 2


class DataError(EegsrError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class ArtifactError(DataError):
    """Missing artifact, wrong magic bytes or stale format version."""


class FeasibilityError(EegsrError, ValueError):
    """Label cannot be aligned to the given number of frames."""

    exit_code = 4


class DegeneracyError(EegsrError, ArithmeticError):
    exit_code = 4

    def __init__(self, msg, rank=None):
        super().__init__(msg)
        self.rank = rank


class TrainingError(EegsrError, RuntimeError):
    exit_code = 4

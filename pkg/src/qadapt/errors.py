"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data problems
exit 2, runtime failures exit 3.
"""


class QadaptError(Exception):
    """Base class for all package errors."""


class DataError(QadaptError):
    """Malformed or inconsistent input data (files, corpora, records)."""


class SpecError(QadaptError):
    """Invalid specification or configuration object."""


class GenerationError(QadaptError):
    """Synthetic corpus generation could not satisfy its constraints."""


class DegenerateSampleError(QadaptError):
    """A sample is too small or has zero range for histogram estimation."""


class TrainingError(QadaptError):
    """Training aborted (non-finite loss, invalid weights, empty data)."""

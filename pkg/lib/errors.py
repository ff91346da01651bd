"""
Exception hierarchy shared by every stage.

Library code raises; only ``app.py`` turns an exception into an exit code.
"""


class SkeletonError(Exception):
    exit_code = 1


class UsageError(SkeletonError):
    """Invalid arguments, configuration or call order."""

    exit_code = 2


class IngestionError(SkeletonError):
    """Input file could not be read as a numeric matrix."""

    exit_code = 3

    def __init__(self, message: str, row: int = None, col: int = None):
        if row is not None:
            message = f'{message} (row {row}, column {col})'

        super().__init__(message)
        self.row = row
        self.col = col


class DegenerateError(SkeletonError):
    exit_code = 4


class DegenerateInputError(DegenerateError):
    """Data cannot support the requested number of knots."""


class DegenerateKnotsError(DegenerateError):
    """Two knots coincide, so a central line is undefined."""


class DegenerateSampleError(DegenerateError):
    """Too few (or constant) points to form an edge estimate."""

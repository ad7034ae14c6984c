"""Exception hierarchy for frfacs."""


class FrfacsError(Exception):
    """Base class for all package errors."""


class DatasetFormatError(FrfacsError, ValueError):
    """A dataset file does not follow the wide-CSV layout (e.g. ragged rows)."""


class DatasetParseError(DatasetFormatError):
    """A cell could not be parsed as a number."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class GridError(FrfacsError, ValueError):
    """Invalid grid, or curves living on different grids were mixed."""


class IllConditionedBasisError(FrfacsError, ValueError):
    """The basis Gram matrix is numerically singular."""


class InsufficientDataError(FrfacsError, ValueError):
    """Too few samples for the requested fit."""


class ConfigurationError(FrfacsError, ValueError):
    """Inconsistent or unsupported configuration."""


class TrainingError(FrfacsError, RuntimeError):
    """Model training cannot proceed on the given data."""


class UnsupportedMetricError(FrfacsError, ValueError):
    """Metric is not defined for this task (e.g. AUPRC with K > 2)."""

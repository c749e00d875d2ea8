"""Exception hierarchy shared by all modules.

Every error carries the process exit code the command line front end uses
when the error escapes a subcommand.
"""

from __future__ import annotations

__all__ = [
    "TwoWayError",
    "SchemaError",
    "ParseError",
    "DuplicateError",
    "ImbalanceError",
    "DegeneratePanelError",
    "CollinearityError",
    "DimensionError",
    "LagRangeError",
    "SingularRestrictionError",
    "UnknownEstimatorError",
    "DesignError",
]


class TwoWayError(ValueError):
    exit_code = 1
    code = "ERROR"


class SchemaError(TwoWayError):
    exit_code = 2
    code = "SCHEMA"


class ParseError(TwoWayError):
    exit_code = 2
    code = "PARSE"

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class DuplicateError(TwoWayError):
    exit_code = 2
    code = "DUPLICATE"


class ImbalanceError(TwoWayError):
    exit_code = 3
    code = "IMBALANCE"

    def __init__(self, message: str, missing: list | None = None):
        super().__init__(message)
        self.missing = list(missing or [])


class DegeneratePanelError(TwoWayError):
    exit_code = 2
    code = "DEGENERATE"


class CollinearityError(TwoWayError):
    exit_code = 4
    code = "COLLINEAR"

    def __init__(self, message: str, column: int | None = None):
        super().__init__(message)
        self.column = column


class DimensionError(TwoWayError):
    exit_code = 2
    code = "DIMENSION"


class LagRangeError(TwoWayError):
    exit_code = 2
    code = "LAG_RANGE"


class SingularRestrictionError(TwoWayError):
    exit_code = 2
    code = "SINGULAR_RESTRICTION"


class UnknownEstimatorError(TwoWayError):
    exit_code = 2
    code = "UNKNOWN_ESTIMATOR"


class DesignError(TwoWayError):
    exit_code = 2
    code = "DESIGN"

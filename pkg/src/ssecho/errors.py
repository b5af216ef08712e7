"""Exception hierarchy.  Each class carries the CLI exit code it maps to."""


class SSEError(Exception):
    exit_code = 1


class ValidationError(SSEError, ValueError):
    """Invalid configuration or input value.  ``field`` names the offender."""

    exit_code = 2

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class SequenceSyntaxError(ValidationError):
    def __init__(self, message, line, column=1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SequenceSemanticError(ValidationError):
    def __init__(self, message, events=()):
        super().__init__(message)
        self.events = tuple(events)


class DataSchemaError(SSEError, ValueError):
    exit_code = 3

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.row = row
        self.column = column


class NumericalError(SSEError, ArithmeticError):
    exit_code = 4


class FitError(NumericalError):
    """Fit failed to converge; ``best`` holds the best parameters seen."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InsufficientDataError(FitError):
    pass

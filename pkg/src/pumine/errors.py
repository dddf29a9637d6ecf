"""Exception hierarchy. The CLI maps each class to an exit code."""


class PumineError(Exception):
    exit_code = 1


class ConfigError(PumineError):
    exit_code = 2


class SchemaError(PumineError):
    exit_code = 3


class DataError(PumineError):
    """Bad input data. ``row`` is 1-based over data rows (header excluded)."""

    exit_code = 3

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class NumericError(PumineError):
    exit_code = 4

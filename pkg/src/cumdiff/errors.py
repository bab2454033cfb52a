"""Exception types raised by the library and mapped to exit codes by the CLI."""


class ConfigError(ValueError):
    """Bad configuration: unknown column, malformed layout or variable map."""


class DataError(ValueError):
    """Bad input data, usually tied to a specific row or record number."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row

"""Exception types shared across the package."""


class AircalError(Exception):
    """Base class for every error this package raises on purpose."""


class ParseError(AircalError):
    """Malformed textual input; the message carries a line/row number when known."""


class SchemaError(AircalError):
    """Column or feature names do not match what an operation expects."""


class IntegrityError(AircalError):
    """Structurally invalid data: duplicate keys, bad node ids, range violations."""


class UnfillableColumnError(AircalError):
    """A column with no observed values cannot be imputed."""


class FormatVersionError(AircalError):
    """A persisted model carries an unsupported format version."""


class ConfigError(AircalError):
    """A run configuration is missing, contradictory, or malformed."""

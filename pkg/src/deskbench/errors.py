"""Shared exception types. CLI exit codes key off these classes."""


class DeskbenchError(Exception):
    """Base class for all errors raised by this package."""


class DataFormatError(DeskbenchError):
    """Malformed input data: bad lines, missing columns, wrong label alphabet."""


class ConfigError(DeskbenchError):
    """Invalid configuration or usage of an operation."""


class ProtocolError(DeskbenchError):
    """Wire-protocol violation: bad frame, oversize payload, unknown type."""

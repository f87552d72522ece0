"""Exception types shared across the package."""


class DrvError(Exception):
    """Base class for all package errors."""


class WordFormatError(DrvError):
    """A word file line could not be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class InvalidWordError(DrvError):
    """A checker was handed a word that fails well-formedness."""


class WrongAlphabetError(DrvError):
    """A word uses payloads outside the language's alphabet."""


class CapExceededError(DrvError):
    """A configured search or enumeration cap was exceeded."""


class UnknownOperationError(DrvError):
    """An operation id is not part of the relation it was queried against."""


class IllegalReorderError(DrvError):
    """An event reordering violates a shared-memory dependency."""


class IncomparableViewsError(DrvError):
    """Two views are not ordered by inclusion (input was not produced by the timed wrapper)."""


class MonitorFaultError(DrvError):
    """A monitor block exceeded its declared wait-free step bound."""


class ConfigError(DrvError):
    """A run or scenario configuration is malformed."""

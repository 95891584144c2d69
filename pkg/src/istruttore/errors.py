"""Exception taxonomy shared across the toolkit.

The CLI maps these onto its exit-code contract:
``ValidationError`` -> 1, ``TransportError`` -> 2, ``NumericError`` -> 3.
"""


class IstruttoreError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(IstruttoreError):
    """Bad input data, configuration, or violated precondition."""


class SchemaError(ValidationError):
    """A document does not match its declared schema."""


class DecodeError(ValidationError):
    """Byte stream is not valid UTF-8."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class ConfigurationError(ValidationError):
    """Inconsistent or out-of-range configuration values."""


class ExtractionError(ValidationError):
    """The response marker was not found in a generated text."""


class TaskError(ValidationError):
    """Task and dataset records do not match."""


class UndefinedScoreError(ValidationError):
    """A metric is undefined for the given inputs (e.g. empty token list)."""


class JudgeParseError(ValidationError):
    """The judge response contained neither a standalone '0' nor '1'."""

    def __init__(self, message: str, raw_response: str):
        super().__init__(message)
        self.raw_response = raw_response


class TransportError(IstruttoreError):
    """A network request failed after exhausting its retry budget."""


class TranslationJobError(TransportError):
    """A translation job aborted; ``completed_count`` records were finished."""

    def __init__(self, message: str, completed_count: int):
        super().__init__(message)
        self.completed_count = completed_count


class NumericError(IstruttoreError):
    """Non-finite values or a malformed probability distribution."""

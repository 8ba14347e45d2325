"""Exception types shared across the package."""


class StsimError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(StsimError, ValueError):
    """An argument violates an operator's precondition."""


class ConfigurationError(StsimError, ValueError):
    """A composite operator or backbone graph is inconsistently configured."""


class FormatError(StsimError, ValueError):
    """A file does not conform to its declared format."""


class DecodeError(FormatError):
    """Image decoding failed; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class WeightNotFoundError(StsimError, KeyError):
    """A named weight entry required by a layer is missing."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"weight entry not found: {self.name!r}"


class DivergenceError(StsimError, RuntimeError):
    """Training produced a non-finite loss; names the offending step."""

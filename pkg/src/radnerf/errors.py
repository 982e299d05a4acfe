"""Exception types shared across the package."""


class RadNerfError(Exception):
    """Base class for package errors."""


class DomainError(RadNerfError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(RadNerfError, ValueError):
    """Inconsistent shapes, parameters or run configuration."""


class FormatError(RadNerfError, ValueError):
    """A binary or text file does not match its declared layout."""


class DivergedError(RadNerfError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, step, loss=float("nan")):
        super().__init__(f"non-finite loss {loss!r} at step {step}")
        self.step = step
        self.loss = loss

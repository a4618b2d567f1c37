"""Exception types raised by the engine."""


class RRError(Exception):
    """Base class for all engine errors."""


class NonTimelikeVelocity(RRError):
    pass


class FutureQuery(RRError):
    """A history was queried beyond its stored frontier."""


class RootNotBracketed(RRError):
    pass


class InsufficientHistory(RRError):
    pass


class DomainError(RRError, ValueError):
    pass


class EmptyEnsemble(RRError):
    pass


class InsufficientSnapshots(RRError):
    pass


class IntegrationError(RRError):
    """Wraps a failure inside the stepper with the proper time where it happened."""

    def __init__(self, s, cause):
        self.s = s
        self.cause = cause
        super().__init__(f"integration failed at s={s!r}: {type(cause).__name__}: {cause}")


class ParseError(RRError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + loc)


class ValidationError(RRError):
    """Collects every problem found in a scenario document.

    ``errors`` is a list of ``(field_path, message)`` pairs.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))

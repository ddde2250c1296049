"""Exception types raised by shapemix."""


class ShapemixError(ValueError):
    """Base class for all library errors."""


class DomainError(ShapemixError):
    """An input lies outside the support of the basis family."""


class DegenerateRangeError(ShapemixError):
    """Samples span an empty range, so no location grid can be formed."""


class InfeasiblePointError(ShapemixError):
    """The objective is infinite at the requested point."""


class UnsupportedBasisError(ShapemixError):
    """The operation is only defined for a different basis family."""


class PreconditionError(ShapemixError):
    """A mathematical hypothesis required for a certificate does not hold."""


class ParseError(ShapemixError):
    """A data file could not be parsed."""

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)

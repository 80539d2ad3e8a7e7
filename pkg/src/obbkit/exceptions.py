"""Exception and warning classes raised across obbkit."""


class DomainError(ValueError):
    """An input lies outside the domain where the operation is defined."""


class ShapeError(ValueError):
    """Input geometry has the wrong shape (e.g. a quad that is not a rectangle)."""


class ConfigError(ValueError):
    """Invalid configuration or parameter combination."""


class NumericalError(ArithmeticError):
    """A computation is numerically ill-conditioned."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class ParseError(ValueError):
    """Malformed annotation text. Carries the 1-based line number when known."""

    def __init__(self, message, lineno=None, source=None):
        self.lineno = lineno
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class DegenerateGeometryWarning(RuntimeWarning):
    """Emitted when a zero-area polygon makes a ratio undefined."""

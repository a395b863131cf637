"""Exception types raised across the package."""


class WonderError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(WonderError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class SolverError(WonderError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularSystemError(WonderError, ArithmeticError):
    """A linear system that should be positive definite is singular."""


class ParseError(WonderError, ValueError):
    """Malformed tabular input; carries the offending location."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column

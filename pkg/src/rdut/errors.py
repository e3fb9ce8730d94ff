"""Exception hierarchy shared by the solver modules."""


class RDUTError(Exception):
    """Base class for all package errors."""


class DomainError(RDUTError, ValueError):
    """An argument lies outside the domain of a function."""


class Infeasible(RDUTError):
    """The budget admits no non-negative outcome (x0 <= 0)."""


class IllPosed(RDUTError):
    """The multiplier equation has no root in the search range."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

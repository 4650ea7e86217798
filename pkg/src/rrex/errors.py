"""Exception hierarchy shared by the solvers, generators and the CLI."""


class RRexError(Exception):
    """Base class for all errors raised by :mod:`rrex`."""


class DegenerateInput(RRexError):
    """All columns handed to the weight solver are numerically zero."""


class NotConverged(RRexError):
    """An iteration hit its budget before reaching the tolerance.

    The partial trace is attached so callers can still report it.
    """

    def __init__(self, message, trace=None, result=None):
        super().__init__(message)
        self.trace = trace
        self.result = result


class DimensionMismatch(RRexError, ValueError):
    pass


class SingularShiftedSystem(RRexError):
    """The sparse factorization of ``A^T + sigma E^T`` failed."""


class IndefiniteY(RRexError):
    """The inner increment factor produced by a RADI step is singular."""


class UnstableProblem(RRexError):
    pass


class OracleFailed(RRexError):
    pass


class IncompleteCache(RRexError, KeyError):
    pass


class PrerequisiteViolated(RRexError):
    pass


class ParseError(RRexError, ValueError):
    def __init__(self, message, lineno=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}".strip() if where else message)
        self.lineno = lineno
        self.path = path


class UnsupportedField(ParseError):
    pass

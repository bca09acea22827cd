"""Exception hierarchy shared across loclab modules."""


class LoclabError(Exception):
    """Base class for all loclab errors."""


class InvalidParameterError(LoclabError, ValueError):
    """A parameter lies outside its documented range."""


class ResourceError(LoclabError):
    """A requested matrix would exceed the configured size cap."""


class SolverError(LoclabError):
    """Eigensolver failed to converge or produced an inaccurate decomposition."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NearEigenvalueError(LoclabError):
    """The shifted matrix ``H - E`` is (numerically) singular."""

    def __init__(self, message, distance=None):
        super().__init__(message)
        self.distance = distance


class PreconditionError(LoclabError, ValueError):
    """An operation was called with inputs violating its precondition."""


class FitInfeasibleError(LoclabError):
    """A decay fit cannot be performed on the supplied data."""


class ConfigError(LoclabError, ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key

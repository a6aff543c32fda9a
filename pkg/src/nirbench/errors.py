"""Exception hierarchy shared across the toolkit."""


class NirbenchError(Exception):
    """Base class for all errors raised by nirbench."""


class DataError(NirbenchError):
    """Malformed or inconsistent spectral data (bad CSV, ragged rows, ...)."""


class SplitError(NirbenchError):
    """A stratified split or CV fold assignment cannot be drawn."""


class SingularCovarianceError(NirbenchError):
    """A covariance matrix needed by a discriminant model is singular."""


class ConvergenceError(NirbenchError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, max_iter=None):
        super().__init__(message)
        self.max_iter = max_iter

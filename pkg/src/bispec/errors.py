"""Exception hierarchy shared by every module.

CLI exit codes are attached to the classes so the runner can map failures
without string matching.
"""


class BispecError(Exception):
    exit_code = 1

    def __init__(self, message, *, stage=None, **info):
        super().__init__(message)
        self.stage = stage
        self.info = info

    def __str__(self):
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


class ParameterError(BispecError, ValueError):
    """Bad argument: out-of-range rank, degree, table size, shapes."""

    exit_code = 2


class DomainError(BispecError, ValueError):
    """Argument outside the mathematical domain (non-dominant weight, band too small)."""

    exit_code = 2


class GenericityError(BispecError):
    """A rank/invertibility hypothesis of the recovery theory fails for this input."""

    exit_code = 3


class UnrecoverableError(GenericityError):
    """The trivial-representation block vanishes, so m1/m2 cannot be read off m3."""


class MarchingBreak(GenericityError):
    def __init__(self, message, *, index, **kw):
        super().__init__(message, index=index, **kw)
        self.index = index


class AlignmentUnavailable(GenericityError):
    pass


class InconsistencyError(BispecError):
    """Input moments are not the moments of any signal (residual above tolerance)."""

    exit_code = 4

"""Exception types raised across the solver."""


class DtnAfemError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParams(DtnAfemError, ValueError):
    pass


class WoodAnomaly(DtnAfemError, ValueError):
    """Some Rayleigh mode sits on a cut-off (|alpha_n| equals a wavenumber)."""


class NotEvanescentWarning(UserWarning):
    """Propagating modes remain beyond the truncation order; the bound is vacuous."""


class DegenerateEdge(DtnAfemError, ValueError):
    pass


class InvalidGeometry(DtnAfemError, ValueError):
    pass


class ProfileTooSteep(InvalidGeometry):
    pass


class UnclassifiableEdge(DtnAfemError, RuntimeError):
    pass


class InconsistentMesh(DtnAfemError, ValueError):
    pass


class QuadratureOverflow(DtnAfemError, ValueError):
    pass


class SingularMatrix(DtnAfemError, RuntimeError):
    pass


class SingularSystem(DtnAfemError, RuntimeError):
    pass


class ParseError(DtnAfemError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(DtnAfemError, ValueError):
    pass

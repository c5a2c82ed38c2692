"""Exception types shared across the package."""


class UnitarizeError(Exception):
    """Base class for all package errors."""


class DimensionError(UnitarizeError, ValueError):
    pass


class DegenerateBodyError(UnitarizeError, ValueError):
    """Input body or ellipsoid is not full-dimensional / not positive definite."""


class NonConvergenceError(UnitarizeError, RuntimeError):
    pass


class CertificateError(UnitarizeError, RuntimeError):
    """A John-decomposition certificate failed its checks."""


class ValidationError(UnitarizeError, ValueError):
    """Structural invariant of an algebraic or bundle object violated."""


class HypothesisError(UnitarizeError, ValueError):
    """An input does not satisfy the hypothesis an analysis requires.

    Kept distinct from a negative verdict: the analysis was not run.
    """

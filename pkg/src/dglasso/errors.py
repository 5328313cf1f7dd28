"""Exception hierarchy shared by all dglasso modules."""


class DGlassoError(Exception):
    """Base class for every error raised by this package."""


class NonSPD(DGlassoError, ValueError):
    """A matrix required to be symmetric positive definite failed Cholesky."""


class DimensionMismatch(DGlassoError, ValueError):
    pass


class SymmetryViolation(DGlassoError, ValueError):
    pass


class SingularSylvester(DGlassoError, ValueError):
    """The Sylvester operator X.A + A.Y is (numerically) singular."""


class NoProgress(DGlassoError, RuntimeError):
    pass


class MaxIterExceeded(DGlassoError, RuntimeError):
    pass


class DivergenceDetected(DGlassoError, RuntimeError):
    """The outer loss rose between two iterations beyond tolerance.

    The partially built fit is attached as ``partial`` for diagnostics.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ZeroReference(DGlassoError, ValueError):
    pass


class DegenerateClass(DGlassoError, ValueError):
    pass


class DegeneratePVector(DGlassoError, ValueError):
    pass

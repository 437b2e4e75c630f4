"""Exception types raised across the package."""


class SksosError(Exception):
    """Base class for all package errors."""


class LengthNotTriangular(SksosError, ValueError):
    """A vector length is not n(n+1)/2 for any integer n."""


class NoConvergence(SksosError, RuntimeError):
    """An iterative eigensolver did not converge."""


class DegenerateGap(SksosError, ValueError):
    """Eigenvalues r and r+1 coincide, so the top-r projector is ill-defined."""


class DegenerateDiagonal(SksosError, ValueError):
    """Some diagonal entry of the projector vanishes."""


class InconsistentInputs(SksosError, ValueError):
    """Inputs disagree with each other (e.g. a Schur identity fails)."""


class RankDeficient(SksosError, ValueError):
    """Frame vectors do not span the ambient space."""


class InfeasibleDimension(SksosError, ValueError):
    """N >= r(r+1)/2, so no degree-4 extension of the ETF Gram matrix exists."""


class InconsistentConstraints(SksosError, ValueError):
    """A gaussian conditioning system has no solution on the covariance support."""


class DimBudgetExceeded(SksosError, ValueError):
    """A symmetric tensor space is too large for dense computation."""

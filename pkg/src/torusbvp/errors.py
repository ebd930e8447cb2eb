"""Exception types shared across the package."""


class TorusBVPError(Exception):
    """Base class for all package-specific errors."""


class DomainError(TorusBVPError):
    """Input violates a documented precondition or invariant."""


class ChartDomainError(DomainError):
    """Point lies on the excluded half-plane of the requested chart."""


class ModeError(TorusBVPError):
    """Field is incompatible with the requested evaluation mode."""


class GradientBoundError(TorusBVPError):
    """Field violates the gradient-energy bound required by the check."""


class InfeasibleError(TorusBVPError):
    """The constraint set of the requested problem is (detectably) empty."""


class NoRootError(TorusBVPError):
    """A 1D root needed by a construction could not be bracketed."""


class NoBracket(TorusBVPError):
    """No constant sub/supersolution pair satisfies the discrete inequalities."""


class NonConvergence(TorusBVPError):
    """Iteration exhausted its budget without meeting the tolerance.

    Carries the partial report (if any) in ``report`` for diagnostics.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SingularJacobian(TorusBVPError):
    """Sparse factorization of a Newton Jacobian failed."""


class OrderingViolation(TorusBVPError):
    """Monotone iteration lost the sub/supersolution bracketing."""


class ConfigError(TorusBVPError):
    """Run configuration failed to parse or validate."""


class ExistenceWindowWarning(UserWarning):
    """Problem data lie outside a sufficient existence window (advisory only)."""


class MeshResolutionWarning(UserWarning):
    """Mesh too coarse to resolve the concentration core of a field."""

"""Exception and warning types shared across the package.

Every precondition violation raises a subclass of :class:`ContractError`,
which the CLI maps to exit code 2.  Warnings never abort a computation;
they are collected into report payloads where a schema has a ``warnings``
field.
"""


class GpilabError(Exception):
    """Base class for all package-specific errors."""


class ContractError(GpilabError, ValueError):
    """An input violated a documented precondition."""

    def payload(self) -> dict:
        return {"type": type(self).__name__, "message": str(self)}


class StructuralError(ContractError):
    """Malformed input: wrong shape, asymmetry, or mismatched dimensions."""


class SingularMatrixError(ContractError):
    """Matrix inversion hit a zero pivot; the message names the pivot."""


class PsdViolationError(ContractError):
    """A matrix required to be positive semidefinite is not."""


class UnsupportedExponentError(ContractError):
    """Exponent outside the range an exact method can handle."""


class DivergentMomentError(ContractError):
    """The requested moment does not exist (integral diverges)."""


class ResourceLimitError(ContractError):
    """Request exceeds the desk-scale degree or dimension caps."""


class DistributionExistenceWarning(UserWarning):
    """Formal moments were computed for a shape parameter where the
    distribution itself is not known to exist."""


class HeavyTailWarning(UserWarning):
    """A Monte Carlo integrand showed very high kurtosis; the reported
    standard error may be optimistic."""


class CovarianceClampWarning(UserWarning):
    """Tiny negative eigenvalues were clamped to zero while factoring a
    semidefinite covariance matrix."""

"""Exception and warning types shared across the package."""

from __future__ import annotations

__all__ = [
    "IcefrontError",
    "NoValidCutoff",
    "CovarianceNotPD",
    "InstanceTooLarge",
    "NeedTwoLevels",
    "DegenerateFit",
    "ConfigInvalid",
    "OutputUnwritable",
    "UnboundedSupportTruncated",
]


class IcefrontError(Exception):
    """Base class for all package-specific errors."""


class NoValidCutoff(IcefrontError):
    """No cutoff with nonnegative density integrates the profile to one."""


class CovarianceNotPD(IcefrontError):
    """Covariance factorization failed; the requested Hurst/grid combination
    is numerically degenerate."""


class InstanceTooLarge(IcefrontError):
    """Brute-force enumeration would exceed the evaluation budget."""


class NeedTwoLevels(IcefrontError):
    """Refinement estimators require at least two mesh levels."""


class DegenerateFit(IcefrontError):
    """Log-log order fit is undefined because some error value is zero."""


class ConfigInvalid(IcefrontError):
    """A run configuration field failed validation.

    Parameters
    ----------
    field:
        Dotted name of the offending configuration entry.
    reason:
        Human-readable explanation.
    """

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class OutputUnwritable(IcefrontError):
    """The requested output directory cannot be created or written."""


class UnboundedSupportTruncated(UserWarning):
    """Spatial truncation dropped a non-negligible part of the initial mass.

    Emitted (not raised) when the lattice cells up to ``I_max`` capture less
    than ``1 - 1e-8`` of the initial law.
    """

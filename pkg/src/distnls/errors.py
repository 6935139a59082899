"""Exception taxonomy shared across the package.

Every hard failure raised by this package derives from :class:`DistnlsError`
so callers can catch one base class.  The distinctions matter operationally:
configuration problems are user-fixable, numeric problems usually mean a
tolerance or grid needs rethinking, and budget problems carry the best result
achieved so the caller can decide whether "close" is good enough.
"""

from __future__ import annotations


class DistnlsError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DistnlsError):
    """Inconsistent, out of range, or malformed configuration input."""


class GridMismatchError(DistnlsError):
    """Two objects built on different grids were combined."""


class NumericError(DistnlsError):
    """A numeric invariant failed badly enough that results are untrustworthy."""


class BudgetExceededError(DistnlsError):
    """A separation or expansion could not meet its tolerance within budget.

    Attributes
    ----------
    best_error : float
        Smallest reconstruction error achieved before giving up.
    n_terms : int
        Number of terms in the best attempt.
    """

    def __init__(self, message, best_error=None, n_terms=None):
        super().__init__(message)
        self.best_error = best_error
        self.n_terms = n_terms


class BlowupError(DistnlsError):
    """A time evolution left the trusted regime (norm growth or NaN)."""

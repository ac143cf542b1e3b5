"""Exception hierarchy.

Every error raised on purpose by this package derives from
:class:`LivsicError`, so callers can tell numerical-contract failures
apart from ordinary Python errors.
"""


class LivsicError(Exception):
    """Base class for all package errors."""


class NewtonDivergence(LivsicError):
    """A Newton solve failed to reach its residual target."""


class EnumerationOverflow(LivsicError):
    """An enumeration (periodic points, branches) exceeds its size guard."""


class BasisMismatch(LivsicError):
    """Two representations live in different bases or resolutions."""


class NonRealObservable(LivsicError):
    """An observable expected to be real-valued is not."""


class IncompatiblePair(LivsicError):
    """The map cannot be discretized in the requested basis."""


class DegenerateLeadingEigenvalue(LivsicError):
    """The eigenvalue of largest modulus is not simple."""


class ContourCrossesSpectrum(LivsicError):
    """A resolvent on the integration contour is numerically singular."""


class WrongEnclosedCount(LivsicError):
    """The contour does not enclose exactly one eigenvalue."""


class ProjectionKilledChi(LivsicError):
    """The Riesz projection maps the invariant density to (almost) zero."""


class DensityVanishes(LivsicError):
    """The invariant density is too small to divide by."""


class SingularResolvent(LivsicError):
    """The restricted linear system for the transfer function is singular."""


class BranchExplosion(LivsicError):
    """Too many inverse-branch words to enumerate."""


class NoneCertified(LivsicError):
    """No parameter in the scanned range produced a positive certificate."""


class ConfigInvalid(LivsicError):
    """An experiment configuration failed validation."""

"""Exception types shared across the package."""


class MatwalkError(Exception):
    """Base class for all package-specific errors."""


class NotInGeneralPosition(MatwalkError):
    """A dual pairing |phi(v)| fell below the degeneracy threshold."""


class NotCentered(MatwalkError):
    """An estimator requiring a recentered law was given one with a
    Lyapunov exponent away from zero."""


class TooLarge(MatwalkError):
    """Exact enumeration was requested beyond the word-count cap."""


class GridTooShort(MatwalkError):
    """A quadrature grid truncates mass: the integrand at the last grid
    point is not negligible relative to its peak."""


class NoGap(MatwalkError):
    """Power iteration failed to contract; the leading eigenvalue is not
    well separated on this grid."""


class UnsupportedDim(MatwalkError):
    """Operator discretization is only available in dimension 2."""


class TooFewSurvivors(MatwalkError):
    """A conditioned check received fewer surviving paths than its floor."""


class DegeneratePath(MatwalkError):
    """A reversed path without general position cannot carry exit times."""


class DegenerateLaw(MatwalkError):
    """The law has zero asymptotic variance; diffusive checks do not apply."""


class LawFileError(MatwalkError):
    """A law file failed validation; the message localizes the offense."""


class ConfigError(MatwalkError):
    """An experiment configuration is malformed."""

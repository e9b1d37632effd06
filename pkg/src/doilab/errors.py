"""Exception types shared across the package."""


class DoilabError(Exception):
    """Base class for all doilab errors."""


class DimensionMismatch(DoilabError):
    """Operands do not share the required dimensions."""


class NonCommuting(DoilabError):
    """Commutator norm of a pair exceeds its declared tolerance."""


class DegenerateResolutionFailure(DoilabError):
    """Joint diagonalization could not reach the requested residual."""


class EvaluationFailure(DoilabError):
    """A scalar function could not be evaluated at a spectral point."""


class ShapeMismatch(DoilabError):
    """Operator argument has the wrong shape for the given spectra."""


class SymbolEvaluationFailure(DoilabError):
    """A symbol produced a non-finite value or raised during sampling."""


class MissingDerivative(DoilabError):
    """A coincidence branch was hit but the needed partial is absent."""


class GridMissingOrigin(DoilabError):
    """A certificate grid must contain the origin on both axes."""


class InvalidSharpness(DoilabError):
    """Filter transition sharpness must be positive."""


class GridTooCoarse(DoilabError):
    """Requested top dyadic scale is not resolved by the FFT grid."""


class ZeroFrequency(DoilabError):
    """The exponential reference norm is undefined at zero frequency."""


class RankTooSmall(DoilabError):
    """Requested factorization rank cannot reconstruct the matrix."""


class InvalidP(DoilabError):
    """Schatten exponent must satisfy p >= 1 (or be infinity)."""


class ZeroPerturbation(DoilabError):
    """Zero perturbation with a nonzero deviation: contract violation."""


class ConfigError(DoilabError):
    """Invalid or unknown configuration input."""

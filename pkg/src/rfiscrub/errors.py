"""Exception types raised across the package."""


class RfiScrubError(Exception):
    """Base class for all package errors."""


class NonFinite(RfiScrubError, ValueError):
    pass


class DimensionMismatch(RfiScrubError, ValueError):
    pass


class ZeroStartVector(RfiScrubError, ValueError):
    pass


class Breakdown(RfiScrubError):
    """Lanczos found an invariant subspace.

    ``state`` holds the Lanczos state after the step that broke down; its Ritz
    values are exact eigenvalues of the matrix restricted to that subspace.
    """

    def __init__(self, beta, tol, state=None):
        super().__init__(f"Lanczos breakdown: beta={beta:.3e} <= tol={tol:.3e}")
        self.beta = beta
        self.tol = tol
        self.state = state


class NonPositiveEigenvalue(RfiScrubError, ValueError):
    pass


class EmptyTail(RfiScrubError, ValueError):
    pass


class NegativeRadicand(RfiScrubError, ValueError):
    pass


class ZeroMinEigenvalue(RfiScrubError, ValueError):
    pass


class NoAcceptance(RfiScrubError):
    """QMAM detection ran out of candidates without accepting a hypothesis.

    ``result`` carries the (flagged) :class:`~rfiscrub.detect.DetectionResult`.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NonOrthonormalBasis(RfiScrubError, ValueError):
    pass


class DegenerateDenominator(RfiScrubError, ValueError):
    pass


class FormatError(RfiScrubError, ValueError):
    """Malformed covariance file. ``kind`` names the failure."""

    def __init__(self, kind, message=""):
        super().__init__(f"{kind}: {message}" if message else kind)
        self.kind = kind


class HermitianViolation(RfiScrubError, ValueError):
    pass


class ConfigError(RfiScrubError, ValueError):
    pass


class BandMismatch(RfiScrubError, ValueError):
    pass

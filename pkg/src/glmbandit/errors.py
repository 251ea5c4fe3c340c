"""Exception types shared across the package."""


class GlmBanditError(Exception):
    """Base class for all library errors."""


class InvalidConfigError(GlmBanditError):
    """A configuration value or combination of values is not usable."""


class NumericalError(GlmBanditError):
    """Base class for numerical failures (CLI exit code 3)."""


class SingularDesignError(NumericalError):
    """The design matrix V is numerically singular (min eigenvalue < 1e-10)."""


class SingularFisherError(NumericalError):
    """The Fisher step matrix stayed below the eigenvalue floor even after
    the ridge fallback."""


class NonPositiveDefiniteError(NumericalError):
    """A quadratic form that must be nonnegative evaluated below -1e-12."""

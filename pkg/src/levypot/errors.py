"""Exception types shared across the package."""


class LevypotError(Exception):
    """Base class for package errors."""


class UnsupportedKindError(LevypotError):
    """Raised when an operation needs structure a catalog entry lacks.

    Typical case: the time-domain Green route needs a closed-form potential
    density, which only the pure power-law entry provides.  The message
    names the Fourier-route fallback when one exists.
    """


class DomainSpecError(LevypotError):
    """Raised for malformed catalog ids or domain spec strings."""


class TransienceError(LevypotError):
    """Raised when a Green-type quantity is requested for a process whose
    transience could not be established."""


class UnstableRatioError(LevypotError):
    """Raised when a ratio estimate has a denominator indistinguishable
    from zero at its own error bar."""


class CertificateError(LevypotError):
    """Raised when a geometry certificate request cannot be satisfied."""


class TabulationRangeError(LevypotError):
    """Raised when an inverse-transform draw falls outside the tabulated
    range of a distribution table."""

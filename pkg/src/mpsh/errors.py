"""Exception hierarchy shared across the package."""

from __future__ import annotations


class MPSHError(Exception):
    """Base class for all errors raised by mpsh."""


class DimensionError(MPSHError, ValueError):
    """Shapes of the operands do not fit together."""


class NotHermitianError(MPSHError, ValueError):
    """A Hermitian input was required."""


class CapExceededError(MPSHError):
    """A brute-force size cap would be exceeded."""


class NumericalError(MPSHError):
    """A numerical routine failed to produce a trustworthy answer."""


class DegenerateChainError(NumericalError):
    """The chain normalization vanishes."""


class NotErgodicError(MPSHError):
    """The channel does not have a unique invariant state (or is not mixing).

    The offending :class:`~mpsh.channel.SpectralReport` is attached as ``report``.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class NoCertificateError(MPSHError):
    """The Markov-Dobrushin constant does not certify mixing (trace <= 0)."""


class ConsistencyError(MPSHError):
    """The projective consistency identity fails; attached report in ``report``."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report

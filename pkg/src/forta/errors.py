"""Exception types shared across the package."""


class FortaError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(FortaError, ValueError):
    """An input vector or matrix has the wrong shape."""


class InvalidConfiguration(FortaError, ValueError):
    """A parameter set violates a structural constraint."""


class LocalizationFailure(FortaError):
    """An error-locator root could not be matched to any root of unity.

    Carries the offending root in ``root``.
    """

    def __init__(self, root, message=None):
        self.root = root
        super().__init__(message or f"locator root {root!r} matches no codeword position")


class DecodeUnreliable(FortaError):
    """Decoding finished but the residual indicates the result is not trustworthy.

    Carries the partial ``DecodeResult`` in ``result``.
    """

    def __init__(self, result, message=None):
        self.result = result
        super().__init__(message or f"decode residual {result.residual:.3e} exceeds reliability threshold")


class ProtocolViolation(FortaError):
    """A participant deviated from the message schedule (missing/duplicate share or message)."""


class InsufficientData(FortaError, ValueError):
    """Not enough samples to compute the requested statistic."""


class IngestionError(FortaError, ValueError):
    """A CSV input file does not match the expected schema."""

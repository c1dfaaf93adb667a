"""Exception types shared across the package."""


class PqsigError(Exception):
    """Base class for every error raised by this package."""


class ParamError(PqsigError):
    """Invalid parameter or shape-incompatible input."""


class LengthError(PqsigError):
    """Requested output length exceeds the configured maximum."""


class KeyReuseError(PqsigError):
    """A one-time private key was asked to sign a second message."""


class KeyExhausted(PqsigError):
    """A multi-time signer has no unused leaves left."""


class StateError(PqsigError):
    """Signer state could not be persisted; the signature was withheld."""


class StateRegressionError(PqsigError):
    """A state commit attempted to move the signing index backwards."""


class FormatError(PqsigError):
    """Malformed serialized data.  ``field`` names the first check that failed."""

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class DegenerateBasis(PqsigError):
    """A lattice basis is singular or could not be generated."""


class SigningFailure(PqsigError):
    """Lattice signing could not meet the acceptance bound after retries."""


class AttackInconclusive(PqsigError):
    """The key-recovery attack did not converge to a full set of directions."""


class IncompleteGrid(PqsigError):
    """A benchmark report lacks the rows needed to evaluate a scaling claim."""

"""Exception hierarchy shared across the package.

Every error raised by the library derives from :class:`BiochainError`,
so callers (notably the CLI) can map failures to stable one-line codes.
"""


class BiochainError(Exception):
    """Base class for all library errors."""

    code = "error"


class ParseError(BiochainError):
    """Malformed input row or document."""

    code = "parse-error"


class DimensionError(BiochainError):
    """Operand lengths or dimensions do not match the declared shape."""

    code = "dimension-error"


class RangeError(BiochainError):
    """Argument outside its valid range."""

    code = "range-error"


class EmptySpecError(BiochainError):
    """Synthetic dataset spec describes zero samples."""

    code = "empty-spec"


class InsufficientPairsError(BiochainError):
    """Requested more comparison pairs than the dataset can supply."""

    code = "insufficient-pairs"


class InsufficientDataError(BiochainError):
    """Not enough training points for the requested codebook size."""

    code = "insufficient-data"


class ConfigurationError(BiochainError):
    """Inconsistent or unsupported configuration values."""

    code = "configuration-error"


class SelectionStalledError(BiochainError):
    """Subset selection ran out of feasible candidates before reaching the target."""

    code = "selection-stalled"

    def __init__(self, message: str, achieved_d: int):
        super().__init__(message)
        self.achieved_d = achieved_d


class DomainError(BiochainError):
    """Mathematical argument outside the operation's domain (e.g. negative radicand)."""

    code = "domain-error"


class IntegerOverflowError(BiochainError):
    """Intermediate value exceeds the simulated on-chain integer width."""

    code = "overflow-error"


class EvalProtocolError(BiochainError):
    """Score sets or reference counts violate the evaluation protocol."""

    code = "protocol-error"


class StateError(BiochainError):
    """Operation invalid for the current contract state."""

    code = "state-error"


class DuplicateUserError(BiochainError):
    """User id already holds a record."""

    code = "duplicate-user"


class UserNotFoundError(BiochainError):
    """No record stored under the given user id."""

    code = "user-not-found"


class PayloadError(BiochainError):
    """Empty or otherwise unusable template payload."""

    code = "payload-error"


class ProofError(BiochainError):
    """Malformed inclusion proof."""

    code = "proof-error"


class AvailabilityError(BiochainError):
    """Off-chain data is missing; integrity cannot be decided."""

    code = "availability-error"


class TamperError(BiochainError):
    """Stored data fails its integrity check; distinct from a biometric reject."""

    code = "tamper-detected"

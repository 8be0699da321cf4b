"""Exception types shared across the package."""


class SecrecastError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(SecrecastError):
    """Operands have incompatible dimensions."""


class Singular(SecrecastError):
    """A square matrix required to be invertible is rank deficient."""


class KeySetIncoherent(SecrecastError):
    """No regenerating vector can make the key-derived round matrix invertible.

    Raised when the retry budget for resampling the regenerating vector is
    exhausted, or eagerly when a key set contains duplicate base rows (a
    shared XOR preserves row equality, so every round matrix is singular).
    """


class MissingKey(SecrecastError):
    """A client was asked to decode a message it holds no key for."""


class IncompleteReception(SecrecastError):
    """Decoding was attempted before all coded streams were available."""


class IncompleteSet(SecrecastError):
    """A packet set is missing one or more stream indices."""

    def __init__(self, missing):
        self.missing = tuple(sorted(missing))
        super().__init__(f"missing packet indices: {list(self.missing)}")


class Inconsistent(SecrecastError):
    """Packets in a set disagree on length or session id."""


class KeyshareBudgetExceeded(SecrecastError):
    """Opportunistic key distribution ran out of candidate broadcasts.

    Carries the partial result so callers can still account for what was
    established before the budget ran out.
    """

    def __init__(self, assignment, broadcasts, unkeyed):
        self.assignment = dict(assignment)
        self.broadcasts = broadcasts
        self.unkeyed = tuple(sorted(unkeyed))
        super().__init__(
            f"{len(self.unkeyed)} message(s) still unkeyed after "
            f"{broadcasts} candidate broadcasts"
        )


class InfeasibleEnumeration(SecrecastError):
    """Exact enumeration was requested beyond the supported size bound."""


class DomainError(SecrecastError):
    """An argument is outside its mathematical domain."""


class ConfigError(SecrecastError, ValueError):
    """A session configuration or input file failed validation."""

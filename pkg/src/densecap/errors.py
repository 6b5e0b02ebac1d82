"""Exception types shared across the package."""


class DensecapError(ValueError):
    """Base class for all structured errors raised by this package."""


class DimensionMismatchError(DensecapError):
    """Array shapes do not match what an operation requires."""

    def __init__(self, where, expected, actual):
        self.where = where
        self.expected = expected
        self.actual = actual
        super().__init__(f"{where}: expected {expected}, got {actual}")


class InvalidNetworkError(DensecapError):
    """A network violates a structural invariant (bounds, divisibility, depth)."""


class InvalidBoundError(DensecapError):
    """The amplification bound is too small for the requested construction."""


class ParseError(DensecapError):
    """A serialized record could not be decoded."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        loc = "" if line is None else f" (line {line})"
        super().__init__(f"{message}{loc}")


class ValidationFailedError(DensecapError):
    """A kernel failed structural validation where a valid one was required."""


class CapacityError(DensecapError):
    """Exact computation refused: instance too large for the configured cap."""


class ParameterError(DensecapError):
    """An argument is outside the operation's stated domain."""


class EquivalenceViolationError(DensecapError):
    """A quantity that should be constant on a cell varies beyond tolerance."""


class IngestionError(DensecapError):
    """A dataset file is missing, truncated, or malformed."""

    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        loc = "" if path is None else f" [{path}]"
        off = "" if offset is None else f" at byte {offset}"
        super().__init__(f"{message}{loc}{off}")

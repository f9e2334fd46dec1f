"""Exception hierarchy. Each class maps to one CLI exit code."""


class QuboundError(Exception):
    exit_code = 1


class ValidationError(QuboundError, ValueError):
    """An input violates a type invariant; the message names the invariant."""

    exit_code = 3


class ShapeError(ValidationError):
    """Operand dimensions are incompatible."""


class ResourceError(QuboundError):
    """A configured dimension or codebook cap would be exceeded."""

    exit_code = 4


class VanishingBranchError(QuboundError):
    """A measurement outcome has (numerically) zero probability.

    ``step`` is the zero-based position in the chain and ``partial`` holds
    whatever record was accumulated before the failing step.
    """

    exit_code = 3

    def __init__(self, message, step=None, partial=None):
        super().__init__(message)
        self.step = step
        self.partial = partial

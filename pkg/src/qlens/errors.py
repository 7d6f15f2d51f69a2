"""Exception hierarchy for qlens.

Every error also derives from the builtin it refines, so callers may catch
either the specific class or plain ``ValueError``.
"""


class QLensError(Exception):
    """Base class for all qlens errors."""


class DomainError(QLensError, ValueError):
    """A numeric parameter lies outside its domain (q outside (0,1), |mu| != 1)."""


class ExprSyntaxError(QLensError, ValueError):
    """Invalid expression text."""

    def __init__(self, message: str, text: str, position: int):
        self.text = text
        self.position = position
        pointer = " " * position + "^"
        super().__init__(f"{message} at position {position}\n  {text}\n  {pointer}")


class CompositionError(QLensError, ValueError):
    """Two groupoid morphisms are not composable."""


class InvalidMorphismError(QLensError, ValueError):
    """A morphism violates the validity constraints of the groupoid."""


class GradingError(QLensError, ValueError):
    """An element is not homogeneous of the requested degree."""


class DegenerateWindowError(QLensError, ValueError):
    """The edge-safe window of a truncated operator is empty."""


class ToeplitzError(QLensError, ValueError):
    """A truncated operator is not asymptotically Toeplitz within tolerance."""

    def __init__(self, message: str, max_deviation: float):
        self.max_deviation = max_deviation
        super().__init__(f"{message} (max deviation {max_deviation:.3e})")


class InvariantError(QLensError, ValueError):
    """Traces of a projection are not integral within tolerance."""


class InvalidInvariantError(QLensError, ValueError):
    """A K-invariant violates its validity constraints."""


class TruncationError(QLensError, ValueError):
    """A requested object does not fit into the truncation."""


class LegError(QLensError, ValueError):
    """A leg index s lies outside 1..l."""

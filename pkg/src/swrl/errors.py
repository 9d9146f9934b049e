"""Exception types shared across the package."""


class SwrlError(Exception):
    """Base class for all package errors."""


class InvalidPrior(SwrlError):
    """A spike prior violates one of its invariants (named in the message)."""


class DimensionMismatch(SwrlError):
    """An observation's dimension does not match the test it is fed to."""


class ConvergenceFailure(SwrlError):
    """The symmetric eigensolver exceeded its iteration budget."""


class MalformedSequence(SwrlError):
    """A point sequence has duplicate abscissas or wrong endpoints."""


class NotConcavePosition(SwrlError):
    """Polyline slopes are not strictly positive and strictly decreasing."""


class NotExterior(SwrlError):
    """The supposed exterior point lies on or below the base ROC curve."""


class MarginTooSmall(SwrlError):
    """A strict-inequality margin fell below the numerical tolerance."""


class BudgetInfeasible(SwrlError):
    """A discretization would need more points than the configured limit."""


class DivergentIntegral(SwrlError):
    """Adaptive quadrature tail refinement failed to converge."""


class DegenerateDenominator(SwrlError):
    """The denominator sample of a ratio estimate is identically zero."""


class MalformedOutcomes(SwrlError):
    """A test-outcome vector lacks the fixed constant-test endpoints."""


class TooManyTests(SwrlError):
    """Battery size would make the witness lookup table unreasonably large."""


class NormOverflow(SwrlError):
    """An exact norm computation exceeds double-precision exponent range."""


class UsageError(SwrlError):
    """Invalid CLI configuration; message names the offending field."""

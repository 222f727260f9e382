"""Exception types shared across the package."""


class MCMError(Exception):
    """Base class for every error raised by this package."""


class DivisionNotExact(MCMError):
    """A polynomial division left a nonzero remainder."""


class RingMismatch(MCMError):
    """Operands live in different coefficient rings or variable sets."""


class InvalidGrade(MCMError):
    """An operation received a form of the wrong differential degree."""


class NotHomogeneous(MCMError):
    """A homogeneous polynomial was required."""


class ArityError(MCMError):
    """A point or exponent vector has the wrong length."""


class InvalidConfig(MCMError):
    """Configuration parameters violate their stated ranges."""


class ModeError(MCMError):
    """An operation was requested for a schedule built in another mode."""


class InvalidSelection(MCMError):
    """Row, column or coordinate selection is out of range or inconsistent."""


class CharacteristicTooSmall(MCMError):
    """The field characteristic does not exceed the largest exponent in play."""


class ShapeError(MCMError):
    """A matrix does not have the shape an operation requires."""


class SamplingFailed(MCMError):
    """A constrained sampler could not produce a valid draw."""


class BudgetExceeded(MCMError):
    """An exhaustive enumeration would exceed its configured budget."""


class PivotRejected(MCMError):
    """Gaussian elimination met a zero pivot."""


class InvalidJet(MCMError):
    """A jet point does not satisfy the preconditions of a check."""

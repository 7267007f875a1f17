"""Exception types shared across the toolkit."""


class IsentropeError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(IsentropeError):
    """Critical values violate the alternation constraint.

    ``index`` is the 1-based index of the first offending difference
    v_i - v_{i-1}.
    """

    def __init__(self, index, message):
        super().__init__(message)
        self.index = index


class DomainError(IsentropeError):
    """Parameters fall outside the family's admissible region."""


class SingularityError(IsentropeError):
    """Requested map lies on the singular boundary (collided critical values)."""


class ConvergenceError(IsentropeError):
    """Iterative solve failed from every start; carries the best residual seen."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class BudgetError(IsentropeError):
    """Interval budget exhausted; carries the partial result and depth reached."""

    def __init__(self, message, partial=None, depth=None):
        super().__init__(message)
        self.partial = partial
        self.depth = depth


class RetargetError(IsentropeError):
    """Target point collides with a critical orbit; carries a suggested shift."""

    def __init__(self, message, suggested=None):
        super().__init__(message)
        self.suggested = suggested


class NotApplicableError(IsentropeError):
    """Estimator preconditions not met for this map."""


class NeedsHigherOrderError(IsentropeError):
    """Series truncation error too large at the candidate root."""


class BracketError(IsentropeError):
    """Supplied parameter bracket does not isolate the requested event."""


class NotABasinError(IsentropeError):
    """Seed point does not converge monotonically to the reference orbit."""


class InconsistencyError(IsentropeError):
    """Two applicable estimators disagree beyond their combined brackets."""

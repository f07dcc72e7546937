"""Semantic exception hierarchy.

Callers (library users and the CLI) dispatch on these types rather than on
message strings: validation problems, infeasible privacy budgets, and
numerically singular inputs are distinct failure modes with distinct exit
codes.
"""


class Chi2MechError(Exception):
    """Base error for this package."""


class ValidationError(Chi2MechError, ValueError):
    """Inputs violate a contract: bad distribution, shape or support."""


class SingularMatrixError(Chi2MechError):
    """A matrix that must be inverted is singular past the threshold."""


class InfeasibleEpsilonError(Chi2MechError):
    """The requested budget is too large for the construction to stay in the simplex."""


class NumericalError(Chi2MechError):
    """An internal numerical invariant failed (conditioning breakdown)."""


class ScenarioError(Chi2MechError, ValueError):
    """A scenario file failed to parse; the message carries the field path."""

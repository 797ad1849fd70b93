"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class SolverError(RuntimeError):
    """A root-finder failed to converge or could not bracket a root.

    Attributes
    ----------
    bracket : tuple of float or None
        The interval that was searched.
    residual : float or None
        Absolute residual at the best point found.
    """

    def __init__(self, message: str, bracket=None, residual=None):
        super().__init__(message)
        self.bracket = bracket
        self.residual = residual


class BudgetExceeded(RuntimeError):
    """A computation would exceed its configured size budget."""

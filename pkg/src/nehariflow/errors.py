"""Exception taxonomy for solver failures and misconfigurations."""

from __future__ import annotations


class NehariflowError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(NehariflowError):
    """A problem/discretization/flow combination that is not supported.

    Examples: singular potential under a pointwise discretization, delta
    center off the grid, radial geometry with a non-radial potential.
    """


class ContractViolationError(NehariflowError):
    """Inputs that break an internal calling contract (grid mismatch,
    non-finite values, seed off the constraint manifold)."""


class SpectralConditionError(NehariflowError):
    """The quadratic part of the action is not positive for the given
    frequency: omega is at or below the admissible threshold."""


class StepFailureError(NehariflowError):
    """An implicit step could not be completed (singular or indefinite
    linear system, inner iteration breakdown)."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class BlowUpError(NehariflowError):
    """Pointwise blow-up of an exact nonlinear sub-flow step."""

    def __init__(self, message: str, node_index: int | None = None,
                 iteration: int | None = None):
        super().__init__(message)
        self.node_index = node_index
        self.iteration = iteration


class IterativeFailureError(NehariflowError):
    """An iterative eigenvalue/linear solve failed to converge.

    Carries the best iterate found so the caller can inspect it.
    """

    def __init__(self, message: str, best_value=None, best_vector=None):
        super().__init__(message)
        self.best_value = best_value
        self.best_vector = best_vector

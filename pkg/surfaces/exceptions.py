"""Errors raised by the surfaces library.

Domain violations are validation errors (exit code 1 at the command line);
numerical failures are reported separately (exit code 2).
"""
from typing import Optional

from django.core.exceptions import ValidationError


class DomainError(ValidationError):
    """A precondition of an operation does not hold.

    ``node`` is the ``(i, j)`` grid index of the first offending node when the
    violation is local.
    """

    def __init__(self, message: str, node: Optional[tuple[int, int]] = None, code: str = 'domain'):
        if node is not None:
            message = f"{message} (node i={node[0]}, j={node[1]})"
        super().__init__(message, code=code)
        self.node = node


class NumericalFailure(Exception):
    """Base class for failures of a numerical method."""


class NonConvergence(NumericalFailure):
    def __init__(self, message: str, residual_norm: float, step_norm: float, iterations: int):
        super().__init__(
            f"{message}: residual={residual_norm:.3e}, last step={step_norm:.3e}, "
            f"iterations={iterations}"
        )
        self.residual_norm = residual_norm
        self.step_norm = step_norm
        self.iterations = iterations


class SingularJacobian(NumericalFailure):
    pass


class CellDivergence(NumericalFailure):
    def __init__(self, node: tuple[int, int], steps: int):
        super().__init__(f"cell iteration did not settle at node {node} after {steps} steps")
        self.node = node
        self.steps = steps


class BlowUp(NumericalFailure):
    pass


class ThresholdExceeded(NumericalFailure):
    """A computed residual is above the pass/fail threshold of a run."""

    def __init__(self, what: str, value: float, threshold: float):
        super().__init__(f"{what} = {value:.3e} exceeds the threshold {threshold:.3e}")
        self.what = what
        self.value = value
        self.threshold = threshold

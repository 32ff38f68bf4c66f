"""Exception hierarchy.

Each error carries the process exit code the command line maps it to:
2 for rejected input, 3 for numerical non-convergence.
"""


class MixedAffineError(Exception):
    exit_code = 1


class ValidationError(MixedAffineError, ValueError):
    """Input rejected before any computation."""

    exit_code = 2


class DimensionError(ValidationError):
    pass


class NotC2PlusError(ValidationError):
    """Body fails the positivity or strict-curvature checks."""


class ClassValidationError(ValidationError):
    """A scalar function failed one of its class probes."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class PreconditionError(ValidationError):
    pass


class ConvergenceError(MixedAffineError, ArithmeticError):
    """An inner solver or extrapolation did not converge."""

    exit_code = 3

    def __init__(self, message, data=None):
        super().__init__(message)
        self.data = data


class NonFiniteError(ConvergenceError):
    pass

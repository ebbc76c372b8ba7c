"""Exception and warning types.

``SolverError`` and its subclasses mark failures that carry mathematical
meaning (no bracket, no contraction, ...).  They map to exit code 3 in the
command-line front end, as opposed to usage errors or crashes.
"""


class SolverError(RuntimeError):
    """A numerical stage could not produce a certified result."""

    stage = "solver"

    def __init__(self, message, *, stage=None, **details):
        super().__init__(message)
        if stage is not None:
            self.stage = stage
        self.details = details


class BracketError(SolverError):
    stage = "bracket"


class ConvergenceError(SolverError):
    stage = "convergence"


class MaxIterError(ConvergenceError):
    stage = "max-iter"


class BallEscapeError(SolverError):
    stage = "ball-escape"


class DivergenceError(SolverError):
    stage = "divergence"


class SingularOperatorError(SolverError):
    stage = "singular-operator"


class TruncationWarning(UserWarning):
    """A field is still large at r_max, so truncating the domain matters."""

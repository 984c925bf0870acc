"""Error types shared across the numerical layers.

NumericalError is the base the CLI maps to its numerical-failure exit
code; library code raises the specific subclasses.
"""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class ConvergenceError(NumericalError):
    """An iterative solve stopped short of its tolerance.

    Carries enough context (residual reached, budget spent) for the
    caller to rerun with a larger budget or a coarser target.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StepUnderflowError(NumericalError):
    """The adaptive integrator collapsed its step below the floor.

    t_fail records how far the integration got before giving up.
    """

    def __init__(self, message, t_fail=None):
        super().__init__(message)
        self.t_fail = t_fail

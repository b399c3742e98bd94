"""Exception types raised by the solvers and the separation pipeline."""


class ContractViolation(ValueError):
    """Caller passed inputs that break a documented precondition."""


class RefusalError(RuntimeError):
    """Operation declined to run (size cap exceeded, rank-zero operator, ...)."""


class DegeneracyError(RuntimeError):
    """A solver quantity hit a value where the next update is undefined."""

    def __init__(self, message, iteration=None, diagnostics=None):
        super().__init__(message)
        self.iteration = iteration
        self.diagnostics = diagnostics


class DivergenceError(RuntimeError):
    """Solver produced non-finite values or a runaway residual.

    ``iteration`` is the index of the failing step and ``diagnostics`` holds
    whatever was recorded up to that point.
    """

    def __init__(self, message, iteration=None, diagnostics=None):
        super().__init__(message)
        self.iteration = iteration
        self.diagnostics = diagnostics

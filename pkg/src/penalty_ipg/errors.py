"""Exception types raised by the library."""


class ContractError(ValueError):
    """An argument violates a documented precondition."""


class EstimateUnconvergedError(RuntimeError):
    """An iterative estimate did not reach its tolerance.

    The last iterate is kept on ``estimate`` so callers may still use it.
    """

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


class NoPositiveEigenvalueError(ValueError):
    pass


class DivergenceError(FloatingPointError):
    """A solver produced a non-finite iterate.

    ``component`` is 0 for the penalty step and ``i`` for the forward-backward
    step on the i-th term (1-based).
    """

    def __init__(self, k, component, message=None):
        self.k = k
        self.component = component
        super().__init__(message or f"non-finite iterate at k={k}, component {component}")


class InsufficientDataError(ValueError):
    pass

"""Exception types raised by the planners and solvers."""


class PlanningError(Exception):
    """Base class for planning failures that carry a CLI exit code."""

    exit_code = 1


class SamplingBudgetExceeded(PlanningError):
    """Rejection sampling gave up before finding an acceptable sample."""

    exit_code = 7


class DisconnectedQuery(PlanningError):
    """The query endpoints could not be connected to the roadmap."""

    exit_code = 3


class Unreachable(PlanningError):
    """No path exists between the requested nodes."""

    exit_code = 3


class Infeasible(PlanningError):
    """No path reaches the goal with the requested success probability.

    ``best_probability`` is the largest success bound any path achieves,
    which is the highest ``p_min`` that could be asked for.
    """

    exit_code = 4

    def __init__(self, message, best_probability=0.0):
        super().__init__(message)
        self.best_probability = best_probability


class NonContractive(PlanningError):
    """A robust Bellman update is not a contraction for the given model."""

    exit_code = 5

    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class ConvergenceError(PlanningError):
    """Value iteration did not reach the tolerance within its budget."""

    exit_code = 5

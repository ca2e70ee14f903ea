"""Exception types shared across the package."""


class PcSafetyError(Exception):
    pass


class ConfigurationError(PcSafetyError, ValueError):
    """Bad dimensions, parameters or config file contents."""


class InfeasibleEvaluation(PcSafetyError):
    """A barrier quantity was requested at a point with some F_i >= 0."""


class PredictionUnavailable(PcSafetyError):
    """The analytic prediction term needs a Jacobian channel that is missing."""


class InfeasibleProblem(PcSafetyError):
    pass


class CapacityExceeded(PcSafetyError):
    pass


class SingularGeometry(PcSafetyError):
    """State coincides with an obstacle center."""


class StepFailed(PcSafetyError):
    """Backtracking exhausted or Hessian too ill conditioned."""


class InvalidState(PcSafetyError):
    """Solver iterate is not strictly feasible at the current plant state."""


class NumericalDivergence(PcSafetyError):
    pass

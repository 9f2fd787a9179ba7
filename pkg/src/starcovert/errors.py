"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A physical or algorithm parameter is outside its valid range."""


class DomainError(ValueError):
    """An argument lies outside the domain where a closed form holds."""


class InfeasibleError(RuntimeError):
    """A subproblem has no feasible point.

    ``constraint`` names the constraint family that failed, e.g. ``"sic"`` or
    ``"qos"``.
    """

    def __init__(self, constraint, message=""):
        self.constraint = constraint
        super().__init__(message or f"infeasible: {constraint}")


class ExtractionRefused(RuntimeError):
    """The relaxed solution is not close enough to rank one to extract a beamformer."""


class InfeasibleInstance(RuntimeError):
    """No feasible starting point was found for a channel realization."""


class SolverError(RuntimeError):
    """The conic solver stopped without an acceptable solution."""

    def __init__(self, status, message=""):
        self.status = status
        super().__init__(f"{status}: {message}" if message else status)

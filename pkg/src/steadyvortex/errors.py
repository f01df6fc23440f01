"""Exception hierarchy shared by the solver modules."""


class SteadyVortexError(Exception):
    """Base class for all package errors."""


class InvalidSpec(SteadyVortexError):
    pass


class SpacingTooCoarse(SteadyVortexError):
    pass


class BackendMismatch(SteadyVortexError):
    pass


class SolveFailure(SteadyVortexError):
    pass


class CompatibilityViolation(SteadyVortexError):
    pass


class InvalidKappa(SteadyVortexError):
    pass


class BoxViolation(SteadyVortexError):
    pass


class Infeasible(SteadyVortexError):
    pass


class NoRoot(SteadyVortexError):
    pass


class SiteInfeasible(Infeasible):
    pass


class GridTooLarge(SteadyVortexError):
    pass


class NotConverged(SteadyVortexError):
    """Raised only on request; solvers normally return ``converged=False``."""

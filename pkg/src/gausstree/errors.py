"""Exception hierarchy shared by every module.

Every domain failure derives from :class:`GaussTreeError` so the CLI can map
them to exit code 1 without catching programming errors.
"""


class GaussTreeError(Exception):
    """Base class for domain errors."""


class NotATree(GaussTreeError):
    pass


class InvalidCorrelation(GaussTreeError):
    """A correlation is zero or has magnitude >= 1 (forest / singular model)."""


class CorrelationOutOfRange(GaussTreeError):
    pass


class NodeOutOfRange(GaussTreeError):
    pass


class NotTreeMarginalizable(GaussTreeError):
    """Removing the requested nodes would not leave a tree."""


class NotPositiveDefinite(GaussTreeError):
    pass


class DegenerateVariance(GaussTreeError):
    pass


class DimensionMismatch(GaussTreeError):
    pass


class DegenerateDenominator(GaussTreeError):
    pass


class SolverDiverged(GaussTreeError):
    pass


class ConstraintInfeasible(GaussTreeError):
    pass


class OddDimension(GaussTreeError):
    pass


class CorrelationTooLarge(GaussTreeError):
    pass


class GammaOutOfRange(GaussTreeError):
    pass


class PerfectCorrelationWarning(UserWarning):
    """An empirical correlation hit +-1; the mutual information was clipped."""


class SolverWarning(UserWarning):
    """The exact solver converged from too few starts for its answer to be trusted."""

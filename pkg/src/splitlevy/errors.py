"""Exception types shared across the package."""


class SplitLevyError(Exception):
    """Base class for all package errors."""


class NonConvergence(SplitLevyError):
    """Root bracketing / iteration budget exhausted (malformed exponent)."""


class SubcriticalInput(SplitLevyError):
    """Operation requires a supercritical exponent (b > 0)."""


class NonGreyInput(SplitLevyError):
    """Operation requires Grey's condition (beta > 0 in this family)."""


class StepUnderflow(SplitLevyError):
    """ODE integrator could not meet its tolerance."""


class HorizonOverflow(SplitLevyError):
    """Path stopping rule not met within the configured event budget."""


class MinNotSettled(SplitLevyError):
    """Post-minimum margin rule was not reached; enlarge the margin."""


class InfiniteInterior(SplitLevyError):
    """Concatenation with a non-final path of infinite lifetime."""


class OutOfDomain(SplitLevyError):
    """Query time outside the coding interval."""


class MalformedPath(SplitLevyError):
    """Sequence is not a skip-free excursion-like path."""


class InvalidSite(SplitLevyError):
    """Graft site is not a valid point of the host tree."""


class NotTruncated(SplitLevyError):
    """Tree exceeds the stated truncation height."""


class NotFiniteVariation(SplitLevyError):
    """Operation only defined for finite-variation contours."""


class GridExceedsTruncation(SplitLevyError):
    """Level grid extends beyond the truncation height."""


class EpsilonBelowResolution(SplitLevyError):
    """Occupation-estimator ladder goes below the mesh resolution floor."""


class NodeBudgetExceeded(SplitLevyError):
    """Recursive sampler exceeded its node budget."""

    def __init__(self, msg, seed=None):
        super().__init__(msg if seed is None else f"{msg} (seed={seed})")
        self.seed = seed


class BudgetExceeded(SplitLevyError):
    """Branching-process simulation exceeded its event budget."""


class DegenerateBinning(SplitLevyError):
    """Chi-square binning collapsed below two cells."""


class UnknownExperiment(SplitLevyError):
    """Experiment name not in the registry."""

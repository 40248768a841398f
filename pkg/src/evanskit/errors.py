"""Exception hierarchy shared by all evanskit modules."""


class EvansError(Exception):
    """Base class for all evanskit failures."""


class DimensionError(EvansError, ValueError):
    """Array shapes are incompatible with the requested operation."""


class NumericalError(EvansError, ArithmeticError):
    """A numerical kernel failed (non-convergence, non-finite output)."""


class SplitError(NumericalError):
    """Stable/unstable splitting is ambiguous or ill-conditioned.

    Raised when eigenvalues straddle the split with no real-part gap, or when
    the left/right bases of a subspace are (nearly) orthogonal.
    """

    def __init__(self, message, lam=None, condition=None):
        super().__init__(message)
        self.lam = lam
        self.condition = condition


class DegeneracyError(NumericalError):
    """A frame or wedge lost rank."""


class SubspaceError(EvansError, ValueError):
    """Two frames that should span the same subspace do not."""


class SingularityError(NumericalError):
    """Evaluation requested exactly at a branch point."""


class StepSizeError(NumericalError):
    """Integration could not proceed (singular implicit solve or step underflow)."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class HomotopyError(NumericalError):
    """Newton continuation failed; ``last_good_c`` is the last converged stage."""

    def __init__(self, message, last_good_c=None):
        super().__init__(message)
        self.last_good_c = last_good_c


class NearZeroError(NumericalError):
    """The Evans function is (numerically) zero on the contour."""

    def __init__(self, message, lam=None):
        super().__init__(message)
        self.lam = lam


class BudgetError(NumericalError):
    """Rouche refinement exhausted its sample budget."""

    def __init__(self, message, worst_segment=None):
        super().__init__(message)
        self.worst_segment = worst_segment


class ConfigError(EvansError, ValueError):
    """Invalid experiment or CLI configuration."""


class StiefelWarning(RuntimeWarning):
    """Frame drifted off the Stiefel manifold beyond the trusted threshold."""

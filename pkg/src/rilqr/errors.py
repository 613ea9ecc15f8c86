"""Exception and warning types raised across the package."""


class RilqrError(Exception):
    """Base class for all package errors."""


class DimensionError(RilqrError, ValueError):
    """Inputs with incompatible or out-of-range shapes."""


class NonFiniteError(RilqrError, ValueError):
    """NaN or infinite values where finite data is required."""


class ExcitationError(RilqrError):
    """Data is not rich enough to identify the requested quantities."""


class DivergenceError(RilqrError):
    """A simulated plant state left the admissible region.

    Attributes
    ----------
    step : int
        Time index at which the state norm crossed the limit.
    norm : float
        State norm at that step.
    """

    def __init__(self, step, norm):
        self.step = int(step)
        self.norm = float(norm)
        super().__init__(f"state diverged at step {self.step} (|x| = {self.norm:.3e})")


class NumericalError(RilqrError):
    """A factorization or solve broke down numerically."""


class ModelMismatchWarning(UserWarning):
    """Estimated predictors are inconsistent with an LTI model of the assumed order."""

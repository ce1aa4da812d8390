"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical routine could not reach its accuracy target.

    ``achieved`` carries the best error bound the routine could certify,
    so callers can decide whether the partial result is still usable.
    """

    def __init__(self, message: str, achieved: float | None = None):
        if achieved is not None:
            message = f"{message} (achieved tolerance {achieved:.3e})"
        super().__init__(message)
        self.achieved = achieved


class EstimationError(RuntimeError):
    """A Monte Carlo run produced no usable estimate (e.g. zero exceedances)."""

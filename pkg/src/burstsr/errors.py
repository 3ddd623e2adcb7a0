"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Image or operator dimensions are inconsistent."""


class ParameterError(ValueError):
    """Invalid model or pipeline parameters (e.g. singular color matrix)."""


class UnsupportedPhaseError(ValueError):
    """Augmentation requested on a CFA phase it cannot preserve."""


class SolverNumericalError(RuntimeError):
    """Non-finite values encountered inside an iterative solver.

    Carries whatever diagnostics were recorded up to the failure.
    """

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics

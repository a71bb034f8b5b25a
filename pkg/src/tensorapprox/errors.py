"""Exception hierarchy shared by all solvers."""


class TensorApproxError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(TensorApproxError, ValueError):
    """Shapes, modes or index sets do not fit together."""


class DegenerateInputError(TensorApproxError, ValueError):
    """Input is rank deficient where full rank is required."""


class OutOfChartError(TensorApproxError):
    """A subspace meets the orthogonal complement of the chart anchor."""


class SingularPivotError(TensorApproxError):
    """A CUR pivot block is singular or too ill-conditioned to invert."""


class NewtonFailure(TensorApproxError):
    """A Newton iteration cannot continue; callers fall back to AMM."""


class SingularJacobianError(NewtonFailure):
    pass


class DivergenceError(NewtonFailure):
    pass


class StepRejectedError(NewtonFailure):
    pass


class DegenerateSpectrumError(NewtonFailure):
    """Eigen-gap at the truncation rank is too small for a unique update."""


class ConfigError(TensorApproxError, ValueError):
    pass

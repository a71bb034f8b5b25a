"""Low-rank approximation of tensors: alternating maximization, Newton methods and CUR."""

from .amm import (
    RunTrace,
    StopRule,
    amm,
    build_gram,
    hosvd_init,
    mamm,
    objective,
    random_init,
    random_unit_vectors,
    rank_one_2amm,
    rank_one_amm,
    rank_one_m2amm,
    singular_tuple_residual,
    top_eigenspace,
    two_ammv,
)
from .errors import (
    ConfigError,
    DegenerateInputError,
    DegenerateSpectrumError,
    DimensionError,
    DivergenceError,
    NewtonFailure,
    OutOfChartError,
    SingularJacobianError,
    SingularPivotError,
    StepRejectedError,
    TensorApproxError,
)
from .grassmann import OrthoFrame, chart_to_tuple, orthonormalize, tuple_to_chart
from .matrix_approx import (
    cur_classic,
    cur_error_bound,
    cur_local,
    cur_optimal,
    max_minor,
    pivot_search,
    row_sample_refine,
    svd_rank_k,
)
from .newton import (
    NewtonStop,
    build_contraction_cache,
    hybrid_newton2,
    hybrid_rank_one,
    newton1,
    newton1_jacobian,
    newton2,
    newton2_derivative,
)
from .tensor_core import hs_norm, inner, project, unfold
from .tensor_cur import cur3_build, cur4_build

__all__ = [
    "amm",
    "build_contraction_cache",
    "build_gram",
    "chart_to_tuple",
    "ConfigError",
    "cur3_build",
    "cur4_build",
    "cur_classic",
    "cur_error_bound",
    "cur_local",
    "cur_optimal",
    "DegenerateInputError",
    "DegenerateSpectrumError",
    "DimensionError",
    "DivergenceError",
    "hosvd_init",
    "hs_norm",
    "hybrid_newton2",
    "hybrid_rank_one",
    "inner",
    "mamm",
    "max_minor",
    "newton1",
    "newton1_jacobian",
    "newton2",
    "newton2_derivative",
    "NewtonFailure",
    "NewtonStop",
    "objective",
    "OrthoFrame",
    "orthonormalize",
    "OutOfChartError",
    "pivot_search",
    "project",
    "random_init",
    "random_unit_vectors",
    "rank_one_2amm",
    "rank_one_amm",
    "rank_one_m2amm",
    "row_sample_refine",
    "RunTrace",
    "singular_tuple_residual",
    "SingularJacobianError",
    "SingularPivotError",
    "StepRejectedError",
    "StopRule",
    "svd_rank_k",
    "TensorApproxError",
    "top_eigenspace",
    "tuple_to_chart",
    "two_ammv",
    "unfold",
]

__version__ = "0.1.0"

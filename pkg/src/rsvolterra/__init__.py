"""Regular singular Volterra equations on rays and Borel-Laplace resummation."""

from __future__ import annotations

from .errors import ConditionError, ConfigError, NumericalError, VolterraError
from .grid import (
    NormParams,
    Ray,
    RayGrid,
    SingularFunction,
    build_ray_grid,
    evaluate,
    include,
    weighted_norm,
)
from .kernels import (
    ConditionReport,
    KernelPair,
    PerturbationKernel,
    SeparableKernel,
    estimate_gamma,
    estimate_tau,
    verify_diag,
    verify_reg_p,
    verify_sing,
)
from .laplace import (
    LaplaceResult,
    cauchy_derivatives,
    fractional_integral,
    laplace_transform,
    verify_dictionary,
)
from .level1 import (
    Level1Problem,
    ResummedSolution,
    SingularPoint,
    borel_sum,
    build_kernels,
    choose_ray,
    singular_points,
    solve_at,
    validate_problem,
)
from .proto import (
    PrototypeSolution,
    base_point_invariance,
    compute_prototype,
    estimate_leading_constant,
    verify_fixed_point,
)
from .solver import (
    Solution,
    SolveConfig,
    fit_series_coefficients,
    series_oracle,
    solve_homogeneous,
    solve_inhomogeneous,
    uniqueness_probe,
)
from .volterra import (
    ContractionEstimate,
    OperatorHandle,
    apply,
    beta_moment,
    contraction_estimate,
    lambda_lower_search,
    smoothing_order,
)

__all__ = [
    "ConditionError",
    "ConditionReport",
    "ConfigError",
    "ContractionEstimate",
    "KernelPair",
    "LaplaceResult",
    "Level1Problem",
    "NormParams",
    "NumericalError",
    "OperatorHandle",
    "PerturbationKernel",
    "PrototypeSolution",
    "Ray",
    "RayGrid",
    "ResummedSolution",
    "SeparableKernel",
    "SingularFunction",
    "SingularPoint",
    "Solution",
    "SolveConfig",
    "VolterraError",
    "apply",
    "base_point_invariance",
    "beta_moment",
    "borel_sum",
    "build_kernels",
    "build_ray_grid",
    "cauchy_derivatives",
    "choose_ray",
    "compute_prototype",
    "contraction_estimate",
    "estimate_gamma",
    "estimate_leading_constant",
    "estimate_tau",
    "evaluate",
    "fit_series_coefficients",
    "fractional_integral",
    "include",
    "lambda_lower_search",
    "laplace_transform",
    "series_oracle",
    "singular_points",
    "smoothing_order",
    "solve_at",
    "solve_homogeneous",
    "solve_inhomogeneous",
    "uniqueness_probe",
    "validate_problem",
    "verify_diag",
    "verify_dictionary",
    "verify_fixed_point",
    "verify_reg_p",
    "verify_sing",
    "weighted_norm",
]

"""Determinantal point processes with radial projection kernels on the
Poincare disk and on regular trees: kernels, number variance, and a lower
bound on the variance-to-mean ratio of ball counts."""

from .bounds import (
    BoundReport,
    DegenerateBoundWarning,
    EmpiricalOptions,
    VarianceReport,
    constant_C,
    search_c,
    theorem1_sweep,
)
from .dpp_core import (
    Configuration,
    NonIntegrableTailError,
    correlation_rho_n,
    expectation,
    trace_quadrature,
    variance_direct,
    variance_lunule,
)
from .geometry import (
    DISK_DELTA,
    ContainmentReport,
    GeometryError,
    GrowthProfile,
    SpaceModel,
    ball_volume,
    containment_check,
    delta_estimate,
    dist,
    fit_growth_profile,
    geodesic_point,
    lunule_volume,
    sphere_area,
    tree_containment_exhaustive,
)
from .kernels import (
    DegenerateKernelError,
    KernelError,
    KernelImplementationError,
    KernelValidationError,
    ProjectionReport,
    RadialKernel,
    bergman_kernel,
    custom_radial_kernel,
    identity_kernel,
    scale_kernel,
    tree_spectral_kernel,
    verify_projection,
)
from .policy import DEFAULT_POLICY, NumericPolicy
from .quadrature import QuadratureGrid
from .sampler import (
    DiscretizationError,
    DiscretizedOperator,
    EmpiricalStats,
    discretize,
    empirical_stats,
    sample,
    sample_many,
)

__version__ = "0.1.0"

"""Isotropic linear stochastic interpolants and their contractivity bounds.

The interpolant ``X_t = alpha_t X_0 + beta_t X_1`` joins a base measure to a
target; its drift ``v_t(x) = E[alpha_dot X_0 + beta_dot X_1 | X_t = x]``
generates a flow map transporting one to the other.  This package evaluates
that drift (closed form, quadrature or a sample-based estimator), integrates
the flow with its Jacobian, and checks the Lipschitz bounds on both.
"""

from .bounds import (
    caffarelli_constant,
    corollary_constant,
    gronwall_flow_bound,
    suggested_schedule_bound,
    thm1_flow_bound,
    thm1_lambda,
    thm2_lambda,
)
from .drift import (
    EmpiricalDrift,
    GaussianDrift,
    QuadratureConfig,
    QuadratureDrift,
    drift_gaussian,
    drift_jacobian,
    drift_potential_phi,
    drift_quadrature,
    empirical_drift,
    flowmap_gaussian_closed,
    log_partition_bt,
    make_backend,
    score_quadrature,
)
from .errors import (
    ConfigError,
    DivergenceError,
    DomainError,
    InterpFlowError,
    NumericError,
    ParameterError,
    PreconditionError,
    SamplerError,
    ScheduleError,
    SymmetryError,
    TimeClampError,
    UnsupportedCaseError,
)
from .flow import integrate_flow, pushforward, sde_sample
from .measures import (
    GaussianMeasure,
    PotentialDensity,
    SampleSet,
    gaussian_ot_map,
    gaussian_scaled,
    logcosh1d,
    quartic1d,
    sample,
    standard_gaussian,
)
from .schedules import (
    Schedule,
    check_admissible,
    check_derivatives,
    check_endpoints,
    from_expressions,
    linear,
    make_builtin,
    ou_reparam,
    trig,
    variance_matched,
)
from .verify import (
    brascamp_lieb_check_1d,
    estimator_study,
    matrix_lemma_check,
    verify_thm1,
    verify_thm2,
)

__version__ = "0.1.0"

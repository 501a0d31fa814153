"""Global quasi-geostrophic spectral solver and curvature diagnostics."""

from .curvature import (
    ExtendedVector,
    MCReport,
    ZonalDirection,
    cocycle,
    example_direction,
    gamma_threshold,
    mc_A,
    mc_hat,
    mc_nu,
    trade_wind,
)
from .dynamics import (
    Diagnostics,
    ModelParams,
    SimState,
    UnstableStep,
    diagnostics,
    energy,
    lamb_parameter,
    lamb_parameter_from_burger,
    pv_from_stream,
    random_stream_function,
    rhs,
    rossby_haurwitz,
    run,
    step_rk4,
    stream_from_pv,
)
from .operators import (
    BandedOperator,
    SingularOperator,
    d_dlambda,
    d_dz,
    helmholtz_apply,
    helmholtz_solve,
    helmholtz_solver,
    integral,
    integral_power,
    l2_inner,
    laplacian,
    mul_z,
    poisson_bracket,
    spectral_product,
    z_field,
    z_squared_field,
)
from .spectral import (
    GridField,
    GridTooSmall,
    QuadratureRule,
    RealityViolated,
    SpectralField,
    alp_table,
    analysis,
    gauss_legendre,
    synthesis,
)

__version__ = "0.1.0"

"""Forward and inverse scattering for the Schrodinger operator with a
rank-one separable potential V = lambda (., psi0) psi0."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    Condition7Violation,
    ConditionsViolated,
    NoPotential,
    NonConvergence,
    NotContractive,
    OriginHit,
    QuadratureError,
    ScatteringError,
    SignInconsistent,
    UnderResolved,
    ZeroDenominator,
)
from .grid import (  # noqa: E402
    DirectionSet,
    DirectionalFormFactor,
    FormFactor,
    GaussianProfile,
    MomentumBumpProfile,
    PotentialSpec,
    SampledFunction,
    TabulatedProfile,
    UniformGrid,
    YukawaProfile,
    direction_set,
    directional_form_factor,
    extend_even,
    extend_hermitian,
    form_factor,
    make_uniform_grid,
    radial_fourier,
    restrict,
)
from .singular import (  # noqa: E402
    DenseSingular,
    FFTSingular,
    PVSingular,
    apply_S,
    apply_S_pv,
    dense_matrix,
    project_P,
    project_Q,
)
from .forward import (  # noqa: E402
    Denominator,
    ForwardData,
    Xi,
    amplitude,
    check_condition7,
    closed_form_denominator,
    compute_denominator,
    compute_xi,
    denominator_autocorr,
    forward_F,
    forward_pipeline,
    gaussian_denominator,
    lippmann_schwinger_residual,
    wavefunction,
    yamaguchi_denominator,
)
from .inverse import (  # noqa: E402
    Reconstruction,
    SIECoefficients,
    SolvabilityReport,
    build_sie,
    on_shell_kernel,
    reconstruct_radial,
    solvability_report,
    solve_fixed_point,
    solve_sie,
    winding_number,
)

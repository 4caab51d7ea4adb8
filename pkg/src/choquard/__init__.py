"""Numerical laboratory for radial Choquard ground states.

Two independent solvers (two-parameter shooting and projected gradient
flow) compute positive radial ground states of

    -Lap u + omega u = I(|u|^p) |u|^{p-2} u  on R^3,

and the surrounding modules verify every identity tied to them: the
normalization relations among mass, gradient, and interaction energy, the
Lagrange-multiplier formula, the sharp interaction constant two ways, tail
asymptotics, the kernel bound of the linearized operator, and directional
energy curvature.
"""
from .errors import (
    ChoquardError,
    CompressionWarning,
    FitWindowError,
    FlowDivergenceError,
    GridError,
    IndeterminateClassificationWarning,
    InvariantViolationError,
    LaunchRadiusError,
    MaxIterationsError,
    NoBracketError,
    OutOfRangeError,
    PositivityError,
    SeriesDivergenceWarning,
    TailTruncationWarning,
    ZeroInteractionError,
)
from .flow import FlowConfig, FlowRun, energy_descent_log, flow_minimize, run_flow
from .functionals import (
    Exponents,
    IdentityReport,
    ModelParams,
    admissible_omega,
    d_pair,
    energy,
    exponents,
    gn_functional,
    phi_sigma,
    pohozaev_report,
    rescale_mu,
    s_star,
    weinstein_quotient,
)
from .io import read_profile_csv, write_profile_csv
from .linearization import (
    EnergyCurve,
    KernelCandidate,
    KernelScanResult,
    TailConstants,
    apply_lplus,
    energy_curve,
    kernel_scan,
    project_orthogonal,
    tail_constants,
)
from .radial import (
    NormReport,
    RadialGrid,
    RadialProfile,
    inner_product,
    laplacian_residual,
    make_grid,
    norms,
    riesz_radial,
)
from .series import SeriesLaunch, evaluate_series, ground_series, kernel_series
from .shooting import (
    GroundStateSolution,
    ShootingConfig,
    TailFit,
    Trajectory,
    a_infinity_defect,
    integrate,
    rescale_to_sigma,
    shoot,
    tail_fit,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

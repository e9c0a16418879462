"""Boundary layers of nonlocal-diffusion elliptic problems: profiles, expansions, solver."""

from .asymptotics import (
    B_coefficients,
    ExpansionCoefficients,
    predict_B,
    predict_boundary,
    predict_interior,
)
from .fixtures import FIXTURE_NAMES, fixture
from .geometry import DomainGeometry, coarea_integral, curvature_at_depth, make_domain, tube_volume
from .nonlinearity import (
    NonlocalProblem,
    ScalarFamily,
    ValidationReport,
    antiderivative_F,
    eval_family,
    q_transform,
    validate_problem,
)
from .profiles import (
    LayerProfiles,
    build_Phi,
    build_profiles,
    build_Psi,
    build_W,
    decay_rates,
    expansion_functionals,
    layer_moment,
    solve_b_star,
)
from .solver import (
    LocalSolution,
    NonlocalSolution,
    RadialGrid,
    average_q,
    consistency_map,
    make_grid,
    map_derivative,
    solve_local,
    solve_nonlocal,
)
from .verification import CheckSpec, SweepResult, fit_order, generate_report, run_check

__version__ = "0.1.0"

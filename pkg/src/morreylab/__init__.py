"""Morrey norms, Riesz potentials, capacities and singular-set scans on uniform grids."""

from .analysis import (
    BallFamily,
    MorreyNormResult,
    MorreyParams,
    ParameterError,
    ReconstructionResult,
    maximal_function,
    mollify,
    morrey_norm,
    representation_reconstruct,
    riesz_potential,
    riesz_potential_at,
    zorko_distance,
)
from .capacity import (
    CapacityConfigError,
    CapacityProblem,
    CapacityResult,
    CoverSolution,
    FitError,
    IsocapReport,
    SolverOptions,
    ball_capacity_scaling,
    box_dimension,
    default_ball_pool,
    hausdorff_content,
    isocapacitary_check,
    morrey_capacity,
)
from .fixtures import (
    FIXTURE_KINDS,
    CoefficientField,
    FixtureError,
    SingularEvaluationError,
    de_giorgi_gamma,
    fixture_coefficients,
    fixture_gradient,
    fixture_solution,
    identity_coefficients,
    make_fixture,
    morrey_test_function,
    sample_fixture,
    structure_battery,
)
from .grid import (
    Ball,
    GridError,
    GridSpec,
    Jet,
    ResolutionError,
    SampleError,
    ScalarField,
    VectorField,
    ball_average,
    ball_node_mask,
    ball_volume,
    derivative,
    export_csv,
    gradient,
    jet,
    load_field,
    multi_indices,
    sample_field,
    sample_vector_field,
    save_field,
    sphere_surface,
    unit_ball_volume,
)
from .singular import (
    AverageProfile,
    OscillationProfile,
    RieszProbePlan,
    RieszScan,
    ScanError,
    ScanThresholds,
    SingularReport,
    classify_and_report,
    oscillation_scan,
    riesz_divergence_scan,
    riesz_probe_plan,
    singular_clusters,
    unbounded_average_scan,
)
from .weak_form import (
    CaccioppoliProfile,
    MonotonicityProfile,
    ResidualReport,
    StructureReport,
    TestFunction,
    TestFunctionError,
    battery_residuals,
    bump_battery,
    caccioppoli_check,
    monotonicity_check,
    structure_check,
    weak_residual,
)

__version__ = "0.1.0"

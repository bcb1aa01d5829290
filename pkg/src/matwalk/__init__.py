"""Conditioned random walks driven by products of random matrices.

The package fits together in layers: exact projective geometry and
cocycles (`geometry`), finitely supported matrix laws (`laws`), a
counter-based deterministic sampler (`rng`), compiled path ensembles and
estimators (`walks`), transfer-operator numerics on the circle
(`spectral`), the path-reversal identity and reversed ensembles
(`reversal`), and a reporting harness that replays the limit statements
at finite n with quantified references (`verify`).
"""

from .errors import (
    ConfigError,
    DegenerateLaw,
    DegeneratePath,
    GridTooShort,
    LawFileError,
    MatwalkError,
    NoGap,
    NotCentered,
    NotInGeneralPosition,
    TooFewSurvivors,
    TooLarge,
    UnsupportedDim,
)
from .geometry import (
    DualProjectivePoint,
    ProjectivePoint,
    SquareMatrix,
    act,
    cocycle_sigma,
    cocycle_sigma_star,
    delta,
    dual_act,
    holder_distance,
    in_general_position,
    pairing,
    proj_distance,
    sigma_bound,
)
from .laws import (
    MatrixLaw,
    canonical_law,
    exp_moment,
    irreducibility_diagnostic,
    law_from_jsonable,
    law_to_jsonable,
    load_law,
    recenter,
    save_law,
)
from .rng import SamplerState, derive_seed
from .targets import (
    HatFunction,
    SeparableTarget,
    StepFunction,
    angle_of,
    parse_step_spec,
)
from .walks import (
    SURVIVED,
    EnumerationLeaves,
    EstimateWithCI,
    SnapshotStats,
    WalkPath,
    build_t_grid,
    enumerate_exact,
    estimate_V,
    estimate_exit_local,
    estimate_local_prob,
    estimate_persistence,
    estimate_rho_integral,
    first_exit_time,
    fn_V,
    fn_exit_local,
    fn_interval,
    fn_local_prob,
    fn_persistence,
    fn_rho_inner,
    law_moments,
    simulate_path,
    snapshot_stats,
    summary_ensemble,
)
from .spectral import (
    CircleGrid,
    SpectralModel,
    build_operator,
    imaginary_spectral_radius,
    leading_eig,
    lyapunov_and_variance,
    nu_weights,
    w1_to_weights,
)
from .reversal import (
    PerturbationTriple,
    ReversalResult,
    ReversedPath,
    boundary_sample,
    dual_boundary_sample,
    perturbation_triple,
    perturbed_exit_time,
    reversal_check,
    reversed_array,
    reversed_array_via_cocycle,
    reversed_ensemble,
)
from .verify import (
    ExperimentConfig,
    Report,
    ReportRow,
    SmoothingFamily,
    check_caravenna,
    check_conditioned_clt,
    check_main_cllt,
    check_rho_harmonicity,
    check_unconditioned_llt,
    config_from_jsonable,
    load_config,
    recenter_two_stage,
    run_suite,
)

__version__ = "0.1.0"

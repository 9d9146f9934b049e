"""Spiked Wigner testing laboratory.

Subpackages cover the pipeline end to end: spike priors and the observation
model, the calibrated spectral test and its empirical ROC, closed-form and
numeric ROC-curve geometry (values, envelopes, polylines), exact and Monte
Carlo norms of the truncated likelihood ratio, and the lookup-table witness
that turns an achieved polyline into a ratio saturating those norms.
"""

from .errors import (
    BudgetInfeasible,
    ConvergenceFailure,
    DegenerateDenominator,
    DimensionMismatch,
    DivergentIntegral,
    InvalidPrior,
    MalformedOutcomes,
    MalformedSequence,
    MarginTooSmall,
    NormOverflow,
    NotConcavePosition,
    NotExterior,
    SwrlError,
    TooManyTests,
    UsageError,
)
from .lowdeg import (
    INF_DEGREE,
    NormEstimate,
    exp_trunc,
    ldr_norm_enumerate_rademacher,
    ldr_norm_exact_rademacher,
    ldr_norm_limit,
    ldr_norm_mc,
    overlap_statistic_value,
    overlap_statistics,
    overlap_tail_decay_rademacher,
    ratio_estimate,
    sample_overlap_statistic,
)
from .model import SpikedSample, sample_goe, sample_spiked
from .priors import SpikePrior, finite_atoms, rademacher, sample_vector, sparse_rademacher, validate
from .roc import (
    EnvelopeCurve,
    FunctionCurve,
    PhiCurve,
    RocPolyline,
    concave_position_check,
    discretize_envelope,
    feasibility_bound_check,
    perturb_points,
    phi_deriv,
    phi_eval,
    pushout_check,
    shift_boundary_point,
    upper_concave_envelope,
    val_closed_form,
    val_numeric,
    val_piecewise,
)
from .spectral import (
    CalibratedTest,
    NullCalibration,
    RocEstimate,
    RocRun,
    Spectrum,
    calibrate_null,
    eigenvalues,
    empirical_roc,
    lss_statistic,
    make_test,
    run_test,
    top_eigenvalue_diag,
)
from .streams import derive_rng, mc_collect, resolve_workers
from .witness import (
    SignPattern,
    WitnessEvaluation,
    WitnessFn,
    altsum_interval,
    build_witness,
    evaluate_witness,
    evaluate_witness_synthetic,
    sign_pattern,
)

__version__ = "0.1.0"

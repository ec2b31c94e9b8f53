"""Sharp bounds on conditional expectation functions when the conditioning
variable is interval-censored with a known distribution."""

from importlib.metadata import PackageNotFoundError, version

from .analytic import (
    CrossoverTable,
    MuBounds,
    StepCEF,
    cef_bounds_analytic,
    cef_envelope_analytic,
    crossover,
    crossover_table,
    manski_tamer,
    mu_bounds,
    sharpness_witness,
)
from .calibrate import (
    ReferenceCurve,
    SplineFit,
    default_knots,
    fit_spline,
    max_curvature,
    suggested_cap,
)
from .censorlab import CoverageReport, censor, coverage_report, run_experiment
from .core import (
    BinnedSample,
    CEFEnvelope,
    CefBoundsError,
    CefBoundsWarning,
    ClampWarning,
    DistributionSpec,
    GridCEF,
    InfeasibleError,
    OutcomeRange,
    SnapWarning,
    StatisticSpec,
    TrivialConstraintWarning,
    ValidationError,
    bin_mass,
    flip_sample,
    uniform_dist,
    validate,
)
from .doublecensor import (
    DoubleCensorBounds,
    ScenarioMeans,
    TransitionMatrix,
    double_censored_stat_bounds,
    scenario_means,
    stacking_subintervals,
)
from .inference import ConfidenceSet, CountsSample, MicroSample, bootstrap_bounds
from .io import (
    read_counts_csv,
    read_curve_csv,
    read_dist_csv,
    read_envelope_csv,
    read_micro_csv,
    read_sample_csv,
    read_transition_csv,
    write_envelope_csv,
    write_transition_csv,
    write_witness_csv,
)
from .numeric import (
    ConstraintSet,
    Discretization,
    StatBounds,
    cef_envelope_numeric,
    discretize,
    eval_stat,
    stage1_min_mse,
    stage2_bound_stat,
)

try:
    __version__ = version("cefbounds")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "BinnedSample",
    "CEFEnvelope",
    "CefBoundsError",
    "CefBoundsWarning",
    "ClampWarning",
    "ConfidenceSet",
    "ConstraintSet",
    "CountsSample",
    "CoverageReport",
    "CrossoverTable",
    "Discretization",
    "DistributionSpec",
    "DoubleCensorBounds",
    "GridCEF",
    "InfeasibleError",
    "MicroSample",
    "MuBounds",
    "OutcomeRange",
    "ReferenceCurve",
    "ScenarioMeans",
    "SnapWarning",
    "SplineFit",
    "StatBounds",
    "StatisticSpec",
    "StepCEF",
    "TransitionMatrix",
    "TrivialConstraintWarning",
    "ValidationError",
    "bin_mass",
    "bootstrap_bounds",
    "cef_bounds_analytic",
    "cef_envelope_analytic",
    "cef_envelope_numeric",
    "censor",
    "coverage_report",
    "crossover",
    "crossover_table",
    "default_knots",
    "discretize",
    "double_censored_stat_bounds",
    "eval_stat",
    "fit_spline",
    "flip_sample",
    "manski_tamer",
    "max_curvature",
    "mu_bounds",
    "read_counts_csv",
    "read_curve_csv",
    "read_dist_csv",
    "read_envelope_csv",
    "read_micro_csv",
    "read_sample_csv",
    "read_transition_csv",
    "run_experiment",
    "scenario_means",
    "sharpness_witness",
    "stacking_subintervals",
    "stage1_min_mse",
    "stage2_bound_stat",
    "suggested_cap",
    "uniform_dist",
    "validate",
    "write_envelope_csv",
    "write_transition_csv",
    "write_witness_csv",
]

"""Heterogeneity-aware accumulated local effects with automatic bin splitting."""

from .baselines import GridCurve, ICEBundle, ale_classic, default_grid, ice, pdp
from .binning import (
    BinningConfig,
    DPTables,
    Partition,
    assign_bins,
    bin_cost,
    bin_cost_matrix,
    brute_force_partition,
    dp_optimal_partition,
    fixed_partition,
)
from .effects import (
    FeatureMatrix,
    LocalEffects,
    ModelHandle,
    evaluate_model,
    local_effects,
    local_effects_analytic,
    local_effects_finite_diff,
)
from .errors import (
    CapabilityError,
    DegenerateBinError,
    EmptyBinError,
    InfeasibleError,
    InputError,
    ModelError,
    RhaleError,
)
from .estimator import (
    BinStats,
    DecompositionReport,
    EffectResult,
    accumulate_effect,
    accumulate_std,
    bin_effect,
    bin_std,
    compute_bin_stats,
    decompose_heterogeneity,
    rhale,
    rhale_from_effects,
)
from .evaluation import BenchmarkReport, l_mu, l_rho, l_sigma, run_benchmark
from .synthetic import GeneratorSpec, GroundTruth, dense_oracle, generate, ground_truth

__version__ = "0.1.0"

"""Uncertainty-aware concept explanations for pretrained classifiers.

Estimates per-label concept importance from precomputed embedding bundles,
propagating activation noise into a Gaussian posterior over the weights, and
ships the reference baselines, rank-comparison metrics, and a synthetic
laboratory that checks the estimator against closed-form predictions.
"""

__version__ = "0.1.0"

from .activations import ActivationStats, compute_stats, fit_alpha
from .baselines import (
    BaselineReport,
    ocbm_explain,
    ols_explain,
    oracle_explain,
    tcav_explain,
    ycbm_explain,
)
from .bundle import ProbeBundle, make_bundle, read_bundle, validate_bundle, write_bundle
from .errors import (
    BundleFormatError,
    ChecksumError,
    DimensionError,
    MissingFileError,
    NumericalError,
    UaceError,
    ValidationError,
)
from .estimator import (
    BayesConfig,
    PosteriorExplanation,
    SparsifyConfig,
    explain,
    posterior,
    sparsify,
    tune_hyperparams,
)
from .metrics import (
    RankedExplanation,
    drift,
    jaccard_topk,
    kendall_tau_distance,
    to_ranked,
    topk_abs_diff,
    uncertainty_cos_sim,
)
from .synth import (
    SyntheticScenario,
    corollary_scenario,
    four_color_scenario,
    gen_four_color,
    gen_overcomplete,
    gen_random_bundle,
    gen_spurious_tag,
    gen_undercomplete,
    overcomplete_scenario,
    predict_corollary,
    run_trial_suite,
    spurious_tag_scenario,
    undercomplete_scenario,
)
from .uncertainty import (
    VariantConfig,
    distribution_fit,
    evaluate_uncertainty,
    mc_uncertainty,
)

__all__ = [name for name in dir() if not name.startswith("_")]

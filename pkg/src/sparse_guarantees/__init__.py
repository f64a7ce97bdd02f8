"""
Sparse Guarantees Module

Coherence-based performance guarantees for sparse estimators in Gaussian
noise, the estimators themselves and a deterministic Monte Carlo harness.
"""

__version__ = "1.0.0"

from .errors import (
    SparseGuaranteesError,
    InputError,
    SolverError,
    RankDeficientError,
    NoConvergenceError,
    InfeasibleError,
)
from .numerics import RngStream, StreamPurpose, gaussian, uniforms, operator_norm_sq
from .dictionary import (
    Dictionary,
    DictionaryKind,
    build_dictionary,
    build_random_gaussian,
    build_two_ortho_hadamard,
    coherence,
    exact_ric,
    exact_rop,
    lemma_bounds,
)
from .estimators import (
    EstimatorKind,
    Estimate,
    SparseSignal,
    bpdn_estimate,
    dantzig_estimate,
    omp_estimate,
    run_estimator,
)
from .guarantees import (
    GuaranteeReport,
    adversarial_bpdn_guarantee,
    bpdn_guarantee,
    crb,
    dantzig_guarantee,
    greedy_guarantee,
    guarantee_table,
)
from .experiments import (
    ExperimentConfig,
    ExperimentKind,
    ExperimentTable,
    TrialRecord,
    median_error_experiment,
    mse_vs_snr_experiment,
    mse_vs_sparsity_experiment,
    run_experiment,
    run_trials,
)

__all__ = [
    "__version__",
    "SparseGuaranteesError",
    "InputError",
    "SolverError",
    "RankDeficientError",
    "NoConvergenceError",
    "InfeasibleError",
    "RngStream",
    "StreamPurpose",
    "gaussian",
    "uniforms",
    "operator_norm_sq",
    "Dictionary",
    "DictionaryKind",
    "build_dictionary",
    "build_random_gaussian",
    "build_two_ortho_hadamard",
    "coherence",
    "exact_ric",
    "exact_rop",
    "lemma_bounds",
    "EstimatorKind",
    "Estimate",
    "SparseSignal",
    "bpdn_estimate",
    "dantzig_estimate",
    "omp_estimate",
    "run_estimator",
    "GuaranteeReport",
    "adversarial_bpdn_guarantee",
    "bpdn_guarantee",
    "crb",
    "dantzig_guarantee",
    "greedy_guarantee",
    "guarantee_table",
    "ExperimentConfig",
    "ExperimentKind",
    "ExperimentTable",
    "TrialRecord",
    "median_error_experiment",
    "mse_vs_snr_experiment",
    "mse_vs_sparsity_experiment",
    "run_experiment",
    "run_trials",
]

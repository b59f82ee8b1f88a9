"""Bayesian meta-analysis of adverse-event incidence with left-censored counts.

The package fits a binomial random-effects model in which studies that report
"fewer than c" events contribute their exact censored-interval likelihood, and
compares it against a complete-case fit restricted to studies with reported
counts.
"""
from ._version import VERSION as __version__
from .analysis import (
    AnalysisError,
    AnalysisRequest,
    AnalysisResult,
    compare_models,
    run_analysis,
    run_complete_case,
    run_magec,
)
from .dataset import (
    Dataset,
    DatasetError,
    StudyClass,
    StudyRecord,
    Violation,
    classify_study,
    cutoff_from_percentage,
    load_sample_dataset,
    parse_csv,
    validate_dataset,
)
from .diagnostics import (
    PosteriorSummary,
    convergence_check,
    effective_sample_size,
    posterior_summary,
    split_rhat,
)
from .model import ModelConfig
from .sampler import ChainOutput, McmcConfig, RunProgress, SamplerError, run_model

__all__ = [
    "__version__",
    "AnalysisError",
    "AnalysisRequest",
    "AnalysisResult",
    "ChainOutput",
    "Dataset",
    "DatasetError",
    "McmcConfig",
    "ModelConfig",
    "PosteriorSummary",
    "RunProgress",
    "SamplerError",
    "StudyClass",
    "StudyRecord",
    "Violation",
    "classify_study",
    "compare_models",
    "convergence_check",
    "cutoff_from_percentage",
    "effective_sample_size",
    "load_sample_dataset",
    "parse_csv",
    "posterior_summary",
    "run_analysis",
    "run_complete_case",
    "run_magec",
    "run_model",
    "split_rhat",
    "validate_dataset",
]

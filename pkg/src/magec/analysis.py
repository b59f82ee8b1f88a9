"""Orchestration of the two model fits and the censoring-bias comparison."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

from .dataset import Dataset, classify_study, validate_dataset
from .diagnostics import PosteriorSummary, convergence_check, posterior_summary
from .model import ModelConfig, expit
from .sampler import ChainOutput, McmcConfig, RunProgress, run_model

# Chain substreams are keyed by model so the two fits are independent
# replications under one master seed.
MAGEC_STREAM = 0
COMPLETE_CASE_STREAM = 1

KEY_QUANTITIES = ("overall_incidence", "tau")

ModelProgressSink = Callable[[str, RunProgress], None]


@dataclass(frozen=True)
class AnalysisRequest:
    dataset: Dataset
    model_config: ModelConfig = field(default_factory=ModelConfig)
    mcmc_config: McmcConfig = field(default_factory=McmcConfig)
    run_complete_case: bool = True
    concurrent_chains: bool = False


@dataclass(frozen=True)
class FitBundle:
    model: str  # "magec" | "complete_case"
    overall: PosteriorSummary
    tau: PosteriorSummary
    studies: tuple[PosteriorSummary, ...]
    study_ids: tuple[str, ...]
    warnings: tuple[str, ...]
    chains: tuple[dict, ...]  # per chain: acceptance rates, seed derivation
    seconds: float


@dataclass(frozen=True)
class ComparisonResult:
    magec_median: float
    cc_median: float
    relative_bias_percent: float


@dataclass(frozen=True)
class AnalysisResult:
    dataset: Dataset
    model_config: ModelConfig
    mcmc_config: McmcConfig
    magec: FitBundle
    complete_case: FitBundle | None
    comparison: ComparisonResult | None
    warnings: tuple[str, ...]
    timing: dict  # wall seconds; deliberately absent from the JSON document


class AnalysisError(ValueError):
    pass


def _require_valid(dataset: Dataset) -> None:
    problems = [v for v in validate_dataset(dataset) if v.severity == "error"]
    if problems:
        raise AnalysisError(
            "dataset fails validation: " + "; ".join(str(v) for v in problems)
        )


def _summarize_fit(
    model: str,
    dataset: Dataset,
    outputs: list[ChainOutput],
    seconds: float,
) -> FitBundle:
    overall = posterior_summary(
        [expit(chain.mu) for chain in outputs], "overall_incidence"
    )
    tau = posterior_summary([chain.tau for chain in outputs], "tau")
    studies = tuple(
        posterior_summary(
            [chain.theta[:, i] for chain in outputs], record.study_id
        )
        for i, record in enumerate(dataset.records)
    )
    warning = convergence_check([overall, tau], KEY_QUANTITIES)
    chain_info = tuple(
        {
            "chain_index": chain.chain_index,
            "seed_entropy": chain.seed_entropy,
            "seed_spawn_key": list(chain.seed_spawn_key),
            "acceptance": {
                "mu": float(chain.acceptance["mu"]),
                "eta_mean": float(chain.acceptance["eta"].mean()),
                "log_tau": float(chain.acceptance["log_tau"]),
            },
        }
        for chain in outputs
    )
    return FitBundle(
        model=model,
        overall=overall,
        tau=tau,
        studies=studies,
        study_ids=tuple(record.study_id for record in dataset.records),
        warnings=(warning,) if warning else (),
        chains=chain_info,
        seconds=seconds,
    )


def run_magec(
    request: AnalysisRequest, progress_sink=None
) -> FitBundle:
    """Fit the censoring-aware model to the full dataset."""
    dataset = request.dataset
    _require_valid(dataset)
    if dataset.n_studies < 2:
        raise AnalysisError(
            "at least 2 studies are required; between-study heterogeneity "
            "is unidentifiable from a single study"
        )
    start = time.perf_counter()
    outputs = run_model(
        dataset,
        request.model_config,
        request.mcmc_config,
        progress_sink,
        concurrent=request.concurrent_chains,
        model_stream=MAGEC_STREAM,
    )
    return _summarize_fit(
        "magec", dataset, outputs, time.perf_counter() - start
    )


def complete_case_subset(dataset: Dataset) -> Dataset:
    """Studies whose event count was actually reported.

    A complete-case analyst only ever sees rows with a published Y; rows with
    an unreported count stay invisible whether their cutoff pins the count
    (cutoff 0) or merely bounds it.
    """
    kept = tuple(r for r in dataset.records if r.observed_count is not None)
    return Dataset(
        records=kept, source=f"{dataset.source} (complete case)", warnings=()
    )


def run_complete_case(
    request: AnalysisRequest, progress_sink=None
) -> FitBundle:
    """Fit the same model to the reported-count subset only."""
    _require_valid(request.dataset)
    subset = complete_case_subset(request.dataset)
    if subset.n_studies < 2:
        raise AnalysisError(
            "fewer than 2 studies report an event count; the complete-case "
            "comparison is not estimable, run the censoring-aware analysis "
            "alone (skip the complete-case fit)"
        )
    start = time.perf_counter()
    outputs = run_model(
        subset,
        request.model_config,
        request.mcmc_config,
        progress_sink,
        concurrent=request.concurrent_chains,
        model_stream=COMPLETE_CASE_STREAM,
    )
    return _summarize_fit(
        "complete_case", subset, outputs, time.perf_counter() - start
    )


def compare_models(magec_fit: FitBundle, cc_fit: FitBundle) -> ComparisonResult:
    """Relative bias of the complete-case median against the full-model median."""
    magec_median = magec_fit.overall.median
    cc_median = cc_fit.overall.median
    if magec_median <= 0.0:
        raise AnalysisError(
            "overall incidence median is zero; relative bias is undefined"
        )
    return ComparisonResult(
        magec_median=magec_median,
        cc_median=cc_median,
        relative_bias_percent=100.0 * (cc_median - magec_median) / magec_median,
    )


def run_analysis(
    request: AnalysisRequest,
    progress_sink: ModelProgressSink | None = None,
) -> AnalysisResult:
    """Run the configured fits and assemble the full result bundle."""
    start = time.perf_counter()
    magec_sink = None
    cc_sink = None
    if progress_sink is not None:
        magec_sink = lambda p: progress_sink("magec", p)
        cc_sink = lambda p: progress_sink("complete_case", p)

    magec_fit = run_magec(request, magec_sink)
    cc_fit = None
    comparison = None
    if request.run_complete_case:
        cc_fit = run_complete_case(request, cc_sink)
        comparison = compare_models(magec_fit, cc_fit)

    warnings = list(magec_fit.warnings)
    if cc_fit is not None:
        warnings.extend(f"complete-case fit: {w}" for w in cc_fit.warnings)
    timing = {"magec": magec_fit.seconds, "total": time.perf_counter() - start}
    if cc_fit is not None:
        timing["complete_case"] = cc_fit.seconds
    return AnalysisResult(
        dataset=request.dataset,
        model_config=request.model_config,
        mcmc_config=request.mcmc_config,
        magec=magec_fit,
        complete_case=cc_fit,
        comparison=comparison,
        warnings=tuple(warnings),
        timing=timing,
    )


def result_to_dict(result: AnalysisResult) -> dict:
    """Stable JSON-ready document; wall-clock timing deliberately excluded."""
    dataset = result.dataset

    def fit_block(fit: FitBundle | None) -> dict | None:
        if fit is None:
            return None
        return {
            "model": fit.model,
            "overall_incidence": fit.overall.to_dict(),
            "tau": fit.tau.to_dict(),
            "studies": [s.to_dict() for s in fit.studies],
            "warnings": list(fit.warnings),
            "chains": [dict(c) for c in fit.chains],
        }

    doc = {
        "schema": "magec-results-v1",
        "dataset": {
            "source": dataset.source,
            "n_studies": dataset.n_studies,
            "class_counts": {
                cls.value: count for cls, count in dataset.class_counts().items()
            },
            "studies": [
                {
                    "study_id": r.study_id,
                    "n_treated": r.n_treated,
                    "observed_count": r.observed_count,
                    "cutoff": r.cutoff,
                    "classification": classify_study(r).value,
                }
                for r in dataset.records
            ],
        },
        "config": {
            "model": {
                "prior_scale_a": result.model_config.prior_scale_a,
                "mu_prior_variance": result.model_config.mu_prior_variance,
                "link": result.model_config.link,
            },
            "mcmc": {
                "n_chains": result.mcmc_config.n_chains,
                "n_iter": result.mcmc_config.n_iter,
                "burn_in": result.mcmc_config.burn_in,
                "thin": result.mcmc_config.thin,
                "seed": result.mcmc_config.seed,
                "target_acceptance": result.mcmc_config.target_acceptance,
            },
        },
        "magec": fit_block(result.magec),
        "complete_case": fit_block(result.complete_case),
        "comparison": None,
        "warnings": list(result.warnings),
    }
    if result.comparison is not None:
        doc["comparison"] = {
            "magec_median": result.comparison.magec_median,
            "cc_median": result.comparison.cc_median,
            "relative_bias_percent": result.comparison.relative_bias_percent,
        }
    return doc

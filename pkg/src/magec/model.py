"""Censored binomial random-effects model: links, likelihood terms, priors.

Everything is evaluated in log space. The event probability enters through
theta_i = expit(mu + tau * eta_i) with the non-centered parameterization
alpha_i = tau * eta_i, and tau is handled on the log scale with an explicit
Jacobian so the half-Cauchy prior keeps its mass near zero reachable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from .dataset import Dataset, StudyClass, classify_study, effective_count

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ModelConfig:
    prior_scale_a: float = 2.5
    mu_prior_variance: float = 1.0e4
    link: str = "logit"

    def __post_init__(self) -> None:
        if self.prior_scale_a <= 0:
            raise ValueError(f"prior_scale_a must be positive, got {self.prior_scale_a}")
        if self.mu_prior_variance <= 0:
            raise ValueError(
                f"mu_prior_variance must be positive, got {self.mu_prior_variance}"
            )
        if self.link != "logit":
            raise ValueError(f"only the logit link is supported, got {self.link!r}")


@dataclass
class ParameterState:
    mu: float
    eta: np.ndarray
    log_tau: float
    latent_counts: dict[int, int] = field(default_factory=dict)

    @property
    def tau(self) -> float:
        return math.exp(self.log_tau)


def logit(p):
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("logit requires 0 < p < 1")
    out = np.log(p) - np.log1p(-p)
    return float(out) if out.ndim == 0 else out

def expit(x):
    # exp(-log(1+e^{-x})) never overflows and lands in the open interval
    x = np.asarray(x, dtype=float)
    out = np.exp(-np.logaddexp(0.0, -x))
    out = np.clip(out, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return float(out) if out.ndim == 0 else out


def log_expit(x):
    """log expit(x) and log(1 - expit(x)), both safe for |x| large."""
    x = np.asarray(x, dtype=float)
    return -np.logaddexp(0.0, -x), -np.logaddexp(0.0, x)


def binomial_log_pmf(y, n, theta):
    """log C(n,y) + y log theta + (n-y) log(1-theta) via log-gamma.

    theta in {0, 1} yields 0 or -inf according to whether y contradicts it.
    """
    y_arr = np.asarray(y, dtype=float)
    n_arr = np.asarray(n, dtype=float)
    if np.any(y_arr < 0) or np.any(y_arr > n_arr):
        raise ValueError("binomial_log_pmf requires 0 <= y <= n")
    theta = np.asarray(theta, dtype=float)
    coef = gammaln(n_arr + 1.0) - gammaln(y_arr + 1.0) - gammaln(n_arr - y_arr + 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = coef + xlogy(y_arr, theta) + xlog1py(n_arr - y_arr, -theta)
    return float(out) if out.ndim == 0 else out


def censored_log_cdf(c, n, theta):
    """log P(Y <= c) for Y ~ Binomial(n, theta), by log-sum-exp over the pmf."""
    c = int(c)
    n = int(n)
    if c < 0 or c > n:
        raise ValueError(f"cutoff must satisfy 0 <= c <= n, got c={c}, n={n}")
    if c == n:
        return 0.0
    terms = binomial_log_pmf(np.arange(c + 1), n, theta)
    terms = np.atleast_1d(terms)
    m = terms.max()
    if not np.isfinite(m):
        return -math.inf
    return float(m + np.log(np.exp(terms - m).sum()))


def log_half_cauchy(tau: float, scale: float) -> float:
    return math.log(2.0 / math.pi) - math.log(scale) - math.log1p((tau / scale) ** 2)


def log_prior(state: ParameterState, config: ModelConfig) -> float:
    """N(mu|0,v0^2) + sum N(eta_i|0,1) + half-Cauchy(tau|A) + log-scale Jacobian."""
    v0sq = config.mu_prior_variance
    lp = -0.5 * state.mu**2 / v0sq - 0.5 * (_LOG_2PI + math.log(v0sq))
    eta = np.asarray(state.eta, dtype=float)
    lp += float(-0.5 * np.sum(eta**2) - 0.5 * eta.size * _LOG_2PI)
    lp += log_half_cauchy(state.tau, config.prior_scale_a)
    lp += state.log_tau
    return lp


def _study_thetas(state: ParameterState, n_studies: int) -> np.ndarray:
    eta = np.asarray(state.eta, dtype=float)
    if eta.shape != (n_studies,):
        raise ValueError(f"eta must have length {n_studies}, got shape {eta.shape}")
    return expit(state.mu + state.tau * eta)


def log_posterior_augmented(
    state: ParameterState, dataset: Dataset, config: ModelConfig
) -> float:
    """Joint log density with censored counts replaced by latent values."""
    theta = _study_thetas(state, dataset.n_studies)
    total = log_prior(state, config)
    for i, record in enumerate(dataset.records):
        y = effective_count(record)
        if y is None:
            if i not in state.latent_counts:
                raise ValueError(f"missing latent count for censored study {record.study_id!r}")
            y = state.latent_counts[i]
            if not 0 <= y <= record.cutoff:
                raise ValueError(
                    f"latent count {y} outside [0, {record.cutoff}] "
                    f"for study {record.study_id!r}"
                )
        total += float(binomial_log_pmf(y, record.n_treated, theta[i]))
    return total


def log_posterior_marginalized(
    mu: float,
    eta: np.ndarray,
    log_tau: float,
    dataset: Dataset,
    config: ModelConfig,
) -> float:
    """Joint log density with each censored count summed out via the CDF."""
    state = ParameterState(mu=mu, eta=np.asarray(eta, dtype=float), log_tau=log_tau)
    theta = _study_thetas(state, dataset.n_studies)
    total = log_prior(state, config)
    for i, record in enumerate(dataset.records):
        y = effective_count(record)
        if y is None:
            total += censored_log_cdf(record.cutoff, record.n_treated, theta[i])
        else:
            total += float(binomial_log_pmf(y, record.n_treated, theta[i]))
    return total


@dataclass(frozen=True)
class StudyArrays:
    """Dataset flattened to numpy arrays for the sampler's hot loop.

    y_known holds the effective count for non-censored studies and 0 as a
    placeholder in censored slots; logc_known is the matching log binomial
    coefficient. Censored studies carry per-value coefficient tables and a
    padded k-grid for vectorized truncated-pmf and CDF evaluation.
    """

    n: np.ndarray              # (S,) float
    y_known: np.ndarray        # (S,) float
    logc_known: np.ndarray     # (S,) float
    censored_idx: np.ndarray   # (C,) int indices into the study axis
    cutoffs: np.ndarray        # (C,) int
    coef_tables: tuple[np.ndarray, ...]  # per censored study, length c+1
    k_pad: np.ndarray          # (C, cmax+1) float k values along each support
    coef_pad: np.ndarray       # (C, cmax+1) float, -inf outside the support

    @property
    def n_studies(self) -> int:
        return int(self.n.size)

    @property
    def n_censored(self) -> int:
        return int(self.censored_idx.size)


def build_study_arrays(dataset: Dataset) -> StudyArrays:
    n = np.array([r.n_treated for r in dataset.records], dtype=float)
    y_known = np.zeros(len(dataset.records))
    censored: list[int] = []
    cutoffs: list[int] = []
    for i, record in enumerate(dataset.records):
        y = effective_count(record)
        if y is None:
            censored.append(i)
            cutoffs.append(int(record.cutoff))
        else:
            y_known[i] = float(y)
    logc_known = gammaln(n + 1.0) - gammaln(y_known + 1.0) - gammaln(n - y_known + 1.0)

    coef_tables = []
    for idx, c in zip(censored, cutoffs):
        ks = np.arange(c + 1, dtype=float)
        coef_tables.append(
            gammaln(n[idx] + 1.0) - gammaln(ks + 1.0) - gammaln(n[idx] - ks + 1.0)
        )
    cmax = max(cutoffs, default=0)
    k_pad = np.zeros((len(censored), cmax + 1))
    coef_pad = np.full_like(k_pad, -np.inf)
    for row, (c, table) in enumerate(zip(cutoffs, coef_tables)):
        k_pad[row, : c + 1] = np.arange(c + 1, dtype=float)
        coef_pad[row, : c + 1] = table
    return StudyArrays(
        n=n,
        y_known=y_known,
        logc_known=logc_known,
        censored_idx=np.array(censored, dtype=int),
        cutoffs=np.array(cutoffs, dtype=int),
        coef_tables=tuple(coef_tables),
        k_pad=k_pad,
        coef_pad=coef_pad,
    )

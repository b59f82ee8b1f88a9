"""Metropolis-within-Gibbs engine with truncated-binomial data augmentation.

Sweep order is fixed for reproducibility: latent censored counts, mu, the
eta block (conditionally independent given mu and tau, so proposed and
accepted as a vectorized product kernel), then log tau. Every uniform is
drawn whether or not the acceptance test short-circuits, keeping each
chain's RNG stream aligned with its iteration count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import xlog1py, xlogy, gammaln

from .dataset import Dataset, StudyClass, classify_study
from .model import (
    ModelConfig,
    ParameterState,
    StudyArrays,
    build_study_arrays,
    expit,
    log_half_cauchy,
    logit,
)

ADAPT_BATCH = 50
PROGRESS_EVERY = 1000
_INITIAL_STEP = 0.5


@dataclass(frozen=True)
class McmcConfig:
    n_chains: int = 3
    n_iter: int = 100_000
    burn_in: int = 50_000
    thin: int = 5
    seed: int = 20240601
    target_acceptance: float = 0.44

    def __post_init__(self) -> None:
        if self.n_chains < 1:
            raise ValueError(f"n_chains must be >= 1, got {self.n_chains}")
        if self.n_iter < 1:
            raise ValueError(f"n_iter must be >= 1, got {self.n_iter}")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError(
                f"burn_in must satisfy 0 <= burn_in < n_iter, got {self.burn_in}"
            )
        if self.thin < 1:
            raise ValueError(f"thin must be >= 1, got {self.thin}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ValueError(
                f"target_acceptance must lie in (0, 1), got {self.target_acceptance}"
            )
        if self.n_retained < 100:
            raise ValueError(
                "config retains fewer than 100 draws per chain: "
                f"({self.n_iter} - {self.burn_in}) / {self.thin} < 100"
            )

    @property
    def n_retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


@dataclass(frozen=True)
class RunProgress:
    chain_index: int
    iterations_done: int
    total_iterations: int
    phase: str  # "burn-in" | "sampling"


@dataclass(frozen=True)
class ChainOutput:
    chain_index: int
    mu: np.ndarray          # (m,)
    tau: np.ndarray         # (m,)
    theta: np.ndarray       # (m, n_studies) probability scale
    latents: np.ndarray     # (m, n_censored) augmented counts
    acceptance: dict
    seed_entropy: int
    seed_spawn_key: tuple[int, int]
    step_scales_at_freeze: dict
    step_scales_final: dict

    @property
    def n_retained(self) -> int:
        return int(self.mu.size)


ProgressSink = Callable[[RunProgress], None]


def chain_rng(seed: int, model_stream: int, chain_index: int) -> np.random.Generator:
    """Per-chain substream: SeedSequence(master, spawn_key=(model, chain)).

    The derivation is pure arithmetic on the key, so a chain draws the same
    stream whether it runs serially or in a separate process.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(model_stream, chain_index))
    return np.random.Generator(np.random.PCG64(ss))


def sample_truncated_binomial(
    n: int, theta: float, c: int, rng: np.random.Generator
) -> int:
    """Exact draw from Binomial(n, theta) conditioned on Y <= c.

    The support is enumerated and inverted through one uniform; cutoffs are
    small in practice so this is exact and cheap.
    """
    if not 0 <= c <= n:
        raise ValueError(f"cutoff must satisfy 0 <= c <= n, got c={c}, n={n}")
    if c == 0:
        return 0
    ks = np.arange(c + 1, dtype=float)
    logp = (
        gammaln(n + 1.0)
        - gammaln(ks + 1.0)
        - gammaln(n - ks + 1.0)
        + xlogy(ks, theta)
        + xlog1py(n - ks, -theta)
    )
    logp -= logp.max()
    weights = np.exp(logp)
    cdf = np.cumsum(weights)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), c))


def mh_update_scalar(
    current: float,
    log_density: Callable[[float], float],
    step_scale: float,
    rng: np.random.Generator,
    current_log_density: float | None = None,
) -> tuple[float, bool]:
    """One Gaussian random-walk Metropolis update; symmetric, no correction.

    The uniform is drawn unconditionally so the stream advances identically
    whatever the outcome. Pass current_log_density to skip re-evaluating a
    cached value.
    """
    if current_log_density is None:
        current_log_density = log_density(current)
    if not math.isfinite(current_log_density):
        raise ValueError(f"log density is not finite at current point {current!r}")
    proposal = current + step_scale * rng.standard_normal()
    delta = log_density(proposal) - current_log_density
    log_u = math.log(rng.random())
    if delta >= 0.0 or log_u < delta:
        return proposal, True
    return current, False


def adapt_scale(
    step_scale: float,
    acceptance_history: Sequence[bool] | float,
    target_acceptance: float,
    batch_index: int,
) -> float:
    """Robbins-Monro step: log s += t^(-0.6) * (rate - target), t = batch ordinal.

    Called once per 50-iteration batch during burn-in only; the kernel after
    burn-in is fixed.
    """
    if batch_index < 1:
        raise ValueError(f"batch_index must be >= 1, got {batch_index}")
    if isinstance(acceptance_history, (int, float)):
        rate = float(acceptance_history)
    else:
        history = list(acceptance_history)
        rate = float(np.mean(history)) if history else target_acceptance
    gamma = batch_index ** -0.6
    return step_scale * math.exp(gamma * (rate - target_acceptance))


def _chain_offset(chain_index: int) -> float:
    # -1, 0, +1, then -2, +2, -3, +3, ... so starts stay pairwise distinct
    if chain_index < 3:
        return float(chain_index - 1)
    k = (chain_index - 3) // 2 + 2
    return float(-k if (chain_index - 3) % 2 == 0 else k)


def initialize_chain(
    dataset: Dataset,
    config: McmcConfig,
    chain_index: int,
    rng: np.random.Generator,
) -> ParameterState:
    """Overdispersed deterministic start around the pooled observed proportion.

    mu0 = logit((sum observed Y + 0.5) / (sum N over reporting studies + 1))
    plus a per-chain offset; eta = 0, tau = 1, latent counts 0. With no
    reporting study at all, falls back to logit(0.5 / (sum N + 1)).
    """
    observed = [r for r in dataset.records if r.observed_count is not None]
    if observed:
        total_y = sum(r.observed_count for r in observed)
        total_n = sum(r.n_treated for r in observed)
        pooled = (total_y + 0.5) / (total_n + 1)
    else:
        pooled = 0.5 / (sum(r.n_treated for r in dataset.records) + 1)
    mu0 = float(logit(pooled)) + _chain_offset(chain_index)
    latents = {
        i: 0
        for i, r in enumerate(dataset.records)
        if classify_study(r) is StudyClass.CENSORED
    }
    return ParameterState(
        mu=mu0,
        eta=np.zeros(dataset.n_studies),
        log_tau=0.0,
        latent_counts=latents,
    )


class SamplerError(RuntimeError):
    pass


def _loglik_terms(
    x: np.ndarray,
    arrays: StudyArrays,
    ycur: np.ndarray,
    logccur: np.ndarray,
    marginalized: bool,
) -> np.ndarray:
    """Per-study log likelihood at link-scale values x (length S)."""
    lp = -np.logaddexp(0.0, -x)
    lq = -np.logaddexp(0.0, x)
    ll = logccur + ycur * lp + (arrays.n - ycur) * lq
    if marginalized and arrays.n_censored:
        idx = arrays.censored_idx
        terms = (
            arrays.coef_pad
            + arrays.k_pad * lp[idx, None]
            + (arrays.n[idx, None] - arrays.k_pad) * lq[idx, None]
        )
        peak = terms.max(axis=1)
        ll[idx] = peak + np.log(np.exp(terms - peak[:, None]).sum(axis=1))
    return ll


def run_chain(
    dataset: Dataset,
    model_config: ModelConfig,
    mcmc_config: McmcConfig,
    chain_index: int,
    progress_sink: ProgressSink | None = None,
    *,
    model_stream: int = 0,
    marginalized: bool = False,
    fixed_params: bool = False,
    decision_log: list | None = None,
) -> ChainOutput:
    """One chain of the full Gibbs sweep; see the module docstring for order.

    marginalized targets the censored-CDF posterior instead of augmenting
    (latents stay 0); fixed_params disables the mu/eta/log-tau blocks so the
    latent block can be studied at a pinned parameter value.
    """
    arrays = build_study_arrays(dataset)
    n_studies = arrays.n_studies
    n_cen = arrays.n_censored
    cfg = mcmc_config
    rng = chain_rng(cfg.seed, model_stream, chain_index)
    state = initialize_chain(dataset, cfg, chain_index, rng)

    mu = state.mu
    eta = state.eta.copy()
    ltau = state.log_tau
    tau = math.exp(ltau)
    lat = np.zeros(n_cen, dtype=int)

    ycur = arrays.y_known.copy()
    logccur = arrays.logc_known.copy()
    for l_pos, study_idx in enumerate(arrays.censored_idx):
        ycur[study_idx] = float(lat[l_pos])
        logccur[study_idx] = arrays.coef_tables[l_pos][lat[l_pos]]

    x = mu + tau * eta
    ll = _loglik_terms(x, arrays, ycur, logccur, marginalized)
    if not np.all(np.isfinite(ll)):
        bad = [dataset.records[i].study_id for i in np.flatnonzero(~np.isfinite(ll))]
        raise SamplerError(
            f"non-finite log likelihood at initialization for studies: {bad}"
        )

    v0sq = model_config.mu_prior_variance
    a_scale = model_config.prior_scale_a
    target = cfg.target_acceptance

    s_mu = _INITIAL_STEP
    s_eta = np.full(n_studies, _INITIAL_STEP)
    s_tau = _INITIAL_STEP
    acc_mu = 0
    acc_eta = np.zeros(n_studies, dtype=int)
    acc_tau = 0
    samp_mu = 0
    samp_eta = np.zeros(n_studies, dtype=int)
    samp_tau = 0
    scales_at_freeze: dict = {}

    m = cfg.n_retained
    mu_out = np.empty(m)
    tau_out = np.empty(m)
    theta_out = np.empty((m, n_studies))
    lat_out = np.zeros((m, n_cen), dtype=int)
    keep = 0

    def snapshot() -> dict:
        return {
            "mu": mu,
            "eta": eta.copy(),
            "log_tau": ltau,
            "latents": lat.copy(),
        }

    for it in range(1, cfg.n_iter + 1):
        in_burn = it <= cfg.burn_in

        # -- block 1: latent censored counts (inverse CDF, exact) --
        if not marginalized:
            for l_pos in range(n_cen):
                study_idx = arrays.censored_idx[l_pos]
                xi = x[study_idx]
                lp_i = -np.logaddexp(0.0, -xi)
                lq_i = -np.logaddexp(0.0, xi)
                table = arrays.coef_tables[l_pos]
                ks = np.arange(table.size, dtype=float)
                logp = table + ks * lp_i + (arrays.n[study_idx] - ks) * lq_i
                weights = np.exp(logp - logp.max())
                cdf = np.cumsum(weights)
                u = rng.random() * cdf[-1]
                draw = int(min(np.searchsorted(cdf, u, side="right"), table.size - 1))
                lat[l_pos] = draw
                ycur[study_idx] = float(draw)
                logccur[study_idx] = table[draw]
                ll[study_idx] = logccur[study_idx] + draw * lp_i + (
                    arrays.n[study_idx] - draw
                ) * lq_i

        if not fixed_params:
            # -- block 2: mu --
            pre = snapshot() if decision_log is not None else None
            prop_mu = mu + s_mu * rng.standard_normal()
            x_prop = prop_mu + tau * eta
            ll_prop = _loglik_terms(x_prop, arrays, ycur, logccur, marginalized)
            delta = float(
                ll_prop.sum() - ll.sum() - 0.5 * (prop_mu**2 - mu**2) / v0sq
            )
            log_u = math.log(rng.random())
            accepted = delta >= 0.0 or log_u < delta
            if decision_log is not None:
                decision_log.append(
                    dict(
                        block="mu", iteration=it, state=pre, proposal=prop_mu,
                        delta=delta, log_u=log_u, accepted=accepted,
                    )
                )
            if accepted:
                mu, x, ll = prop_mu, x_prop, ll_prop
                acc_mu += 1
                if not in_burn:
                    samp_mu += 1

            # -- block 3: eta, vectorized independent proposals --
            pre = snapshot() if decision_log is not None else None
            prop_eta = eta + s_eta * rng.standard_normal(n_studies)
            x_prop = mu + tau * prop_eta
            ll_prop = _loglik_terms(x_prop, arrays, ycur, logccur, marginalized)
            deltas = ll_prop - ll - 0.5 * (prop_eta**2 - eta**2)
            log_us = np.log(rng.random(n_studies))
            accepts = (deltas >= 0.0) | (log_us < deltas)
            if decision_log is not None:
                for i in range(n_studies):
                    decision_log.append(
                        dict(
                            block="eta", iteration=it, index=i, state=pre,
                            proposal=float(prop_eta[i]), delta=float(deltas[i]),
                            log_u=float(log_us[i]), accepted=bool(accepts[i]),
                        )
                    )
            eta = np.where(accepts, prop_eta, eta)
            x = np.where(accepts, x_prop, x)
            ll = np.where(accepts, ll_prop, ll)
            acc_eta += accepts
            if not in_burn:
                samp_eta += accepts

            # -- block 4: log tau --
            pre = snapshot() if decision_log is not None else None
            prop_ltau = ltau + s_tau * rng.standard_normal()
            prop_tau = math.exp(prop_ltau)
            x_prop = mu + prop_tau * eta
            ll_prop = _loglik_terms(x_prop, arrays, ycur, logccur, marginalized)
            delta = float(
                ll_prop.sum()
                - ll.sum()
                + log_half_cauchy(prop_tau, a_scale)
                + prop_ltau
                - log_half_cauchy(tau, a_scale)
                - ltau
            )
            log_u = math.log(rng.random())
            accepted = delta >= 0.0 or log_u < delta
            if decision_log is not None:
                decision_log.append(
                    dict(
                        block="log_tau", iteration=it, state=pre, proposal=prop_ltau,
                        delta=delta, log_u=log_u, accepted=accepted,
                    )
                )
            if accepted:
                ltau, tau, x, ll = prop_ltau, prop_tau, x_prop, ll_prop
                acc_tau += 1
                if not in_burn:
                    samp_tau += 1

            # -- adaptation, burn-in only, every ADAPT_BATCH iterations --
            if in_burn and it % ADAPT_BATCH == 0:
                batch = it // ADAPT_BATCH
                s_mu = adapt_scale(s_mu, acc_mu / ADAPT_BATCH, target, batch)
                s_tau = adapt_scale(s_tau, acc_tau / ADAPT_BATCH, target, batch)
                for i in range(n_studies):
                    s_eta[i] = adapt_scale(
                        s_eta[i], acc_eta[i] / ADAPT_BATCH, target, batch
                    )
                acc_mu = 0
                acc_tau = 0
                acc_eta[:] = 0

        if it == cfg.burn_in:
            scales_at_freeze = {
                "mu": s_mu,
                "eta": s_eta.copy(),
                "log_tau": s_tau,
            }

        if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0 and keep < m:
            mu_out[keep] = mu
            tau_out[keep] = tau
            theta_out[keep] = expit(x)
            if n_cen:
                lat_out[keep] = lat
            keep += 1

        if progress_sink is not None and (
            it % PROGRESS_EVERY == 0 or it == cfg.n_iter
        ):
            progress_sink(
                RunProgress(
                    chain_index=chain_index,
                    iterations_done=it,
                    total_iterations=cfg.n_iter,
                    phase="burn-in" if in_burn else "sampling",
                )
            )

    n_sampling = cfg.n_iter - cfg.burn_in
    if not scales_at_freeze:  # burn_in == 0: kernel frozen from the start
        scales_at_freeze = {"mu": s_mu, "eta": s_eta.copy(), "log_tau": s_tau}
    return ChainOutput(
        chain_index=chain_index,
        mu=mu_out,
        tau=tau_out,
        theta=theta_out,
        latents=lat_out,
        acceptance={
            "mu": samp_mu / n_sampling,
            "eta": samp_eta / n_sampling,
            "log_tau": samp_tau / n_sampling,
        },
        seed_entropy=cfg.seed,
        seed_spawn_key=(model_stream, chain_index),
        step_scales_at_freeze=scales_at_freeze,
        step_scales_final={"mu": s_mu, "eta": s_eta.copy(), "log_tau": s_tau},
    )


def _chain_task(args) -> ChainOutput:
    (dataset, model_config, mcmc_config, chain_index, model_stream,
     marginalized, queue) = args
    sink = None
    if queue is not None:
        sink = queue.put
    return run_chain(
        dataset,
        model_config,
        mcmc_config,
        chain_index,
        sink,
        model_stream=model_stream,
        marginalized=marginalized,
    )


def run_model(
    dataset: Dataset,
    model_config: ModelConfig,
    mcmc_config: McmcConfig,
    progress_sink: ProgressSink | None = None,
    *,
    concurrent: bool = False,
    model_stream: int = 0,
    marginalized: bool = False,
) -> list[ChainOutput]:
    """All chains of one model fit, serially or in worker processes.

    Chain substreams depend only on (seed, model_stream, chain_index), so the
    two execution modes produce identical output; results are ordered by
    chain index either way.
    """
    if not concurrent:
        return [
            run_chain(
                dataset,
                model_config,
                mcmc_config,
                i,
                progress_sink,
                model_stream=model_stream,
                marginalized=marginalized,
            )
            for i in range(mcmc_config.n_chains)
        ]

    import multiprocessing as mp
    import threading

    manager = mp.Manager()
    queue = manager.Queue() if progress_sink is not None else None

    def drain() -> None:
        # None is the stop sentinel; RunProgress items are never None
        while True:
            item = queue.get()
            if item is None:
                return
            progress_sink(item)

    drainer = None
    if queue is not None:
        drainer = threading.Thread(target=drain, daemon=True)
        drainer.start()
    try:
        with ProcessPoolExecutor(max_workers=mcmc_config.n_chains) as pool:
            futures = [
                pool.submit(
                    _chain_task,
                    (dataset, model_config, mcmc_config, i, model_stream,
                     marginalized, queue),
                )
                for i in range(mcmc_config.n_chains)
            ]
            outputs = [f.result() for f in futures]
    finally:
        if queue is not None:
            queue.put(None)
            drainer.join(timeout=10)
        manager.shutdown()
    return outputs

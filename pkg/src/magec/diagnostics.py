"""Posterior summarization: quantiles, moments, MCSE, split-Rhat, ESS."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class PosteriorSummary:
    name: str
    median: float
    sd: float
    mean: float
    mcse: float
    cri_lower: float
    cri_upper: float
    rhat: float
    ess: float

    def to_dict(self) -> dict:
        return asdict(self)


def _chain_matrix(draws) -> np.ndarray:
    chains = [np.asarray(chain, dtype=float) for chain in draws]
    if not chains:
        raise ValueError("no chains provided")
    length = chains[0].size
    if any(chain.ndim != 1 or chain.size != length for chain in chains):
        raise ValueError("chains must be one-dimensional and equal length")
    return np.stack(chains)


def split_rhat(draws) -> float:
    """Potential scale reduction factor on half-chains.

    Each chain is split in two (middle draw dropped when odd); with half
    means m_j, B = n var(m_j) and W the mean within-half variance,
    Rhat = sqrt(((n-1)/n W + B/n) / W). All-equal draws return 1 by
    convention; chains frozen at distinct values return inf.
    """
    matrix = _chain_matrix(draws)
    length = matrix.shape[1]
    if length < 4:
        raise ValueError(f"split_rhat needs at least 4 draws per chain, got {length}")
    if np.all(matrix == matrix.flat[0]):
        return 1.0
    n = length // 2
    halves = np.concatenate([matrix[:, :n], matrix[:, length - n :]], axis=0)
    within = halves.var(axis=1, ddof=1)
    w = within.mean()
    if w <= 0.0:
        # every half-chain is frozen but they disagree: no mixing at all
        return math.inf
    b = n * halves.mean(axis=1).var(ddof=1)
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocorrelation(chain: np.ndarray) -> np.ndarray | None:
    """Biased-normalization autocorrelation via FFT; None for a constant chain."""
    n = chain.size
    if np.all(chain == chain[0]):
        return None
    centered = chain - chain.mean()
    size = 1
    while size < 2 * n:
        size *= 2
    spectrum = np.fft.rfft(centered, size)
    acov = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n].real / n
    if acov[0] <= 0.0:
        return None
    return acov / acov[0]


def effective_sample_size(draws) -> float:
    """ESS = total / (1 + 2 sum rho_t), Geyer initial-monotone truncation.

    Autocorrelations are averaged across chains, folded into consecutive
    pair sums, truncated at the first non-positive pair, and forced
    nonincreasing before summing; the result is clamped to [1, total].
    """
    matrix = _chain_matrix(draws)
    n_chains, length = matrix.shape
    if length < 4:
        raise ValueError(
            f"effective_sample_size needs at least 4 draws per chain, got {length}"
        )
    total = float(n_chains * length)
    rhos = [r for r in (_autocorrelation(chain) for chain in matrix) if r is not None]
    if not rhos:
        return 1.0
    rho = np.mean(rhos, axis=0)

    n_pairs = length // 2
    pair_sums = rho[0 : 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    kept: list[float] = []
    ceiling = math.inf
    for value in pair_sums:
        if value <= 0.0:
            break
        ceiling = min(ceiling, float(value))
        kept.append(ceiling)
    tau = max(2.0 * sum(kept) - 1.0, 1.0)
    return float(min(max(total / tau, 1.0), total))


def posterior_summary(draws, name: str) -> PosteriorSummary:
    """Pooled type-7 quantiles plus moments, Rhat, ESS for one quantity.

    draws is a sequence of per-chain 1-D arrays: at least 2 chains of at
    least 100 retained draws each.
    """
    matrix = _chain_matrix(draws)
    n_chains, length = matrix.shape
    if n_chains < 2:
        raise ValueError(f"posterior_summary needs at least 2 chains, got {n_chains}")
    if length < 100:
        raise ValueError(
            f"posterior_summary needs at least 100 draws per chain, got {length}"
        )
    pooled = matrix.reshape(-1)
    median, lo, hi = np.quantile(pooled, [0.5, 0.025, 0.975])
    sd = float(pooled.std(ddof=1))
    ess = effective_sample_size(matrix)
    return PosteriorSummary(
        name=name,
        median=float(median),
        sd=sd,
        mean=float(pooled.mean()),
        mcse=sd / math.sqrt(ess),
        cri_lower=float(lo),
        cri_upper=float(hi),
        rhat=split_rhat(matrix),
        ess=ess,
    )


def convergence_check(summaries, key_quantities) -> str | None:
    """Warning text naming every key quantity with Rhat strictly above 1.01."""
    by_name = {summary.name: summary for summary in summaries}
    flagged = []
    for name in key_quantities:
        if name not in by_name:
            raise ValueError(f"missing key quantity {name!r} in summaries")
        summary = by_name[name]
        if summary.rhat > 1.01:
            flagged.append(f"{name} (Rhat={summary.rhat:.3f})")
    if not flagged:
        return None
    return (
        "Convergence warning: split-Rhat exceeds 1.01 for "
        + ", ".join(flagged)
        + "; increase the lengths of the MCMC chains (more iterations and "
        + "a longer burn-in) and rerun."
    )

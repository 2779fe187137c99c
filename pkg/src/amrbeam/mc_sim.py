"""Monte Carlo oracle for the analytic rate machinery.

Samples correlated Rayleigh channels h_k = R_k^(1/2) g_k with standard complex
Gaussian g_k, forms instantaneous SNRs gamma_bar |h_k^H f|^2, and averages the
interpolated mutual information of the minimum (non-cooperative) or the sum
(cooperative). Sampling is chunked with a fixed chunk size and the chunk sums
are combined with math.fsum, so estimates are bitwise reproducible for a given
(seed, n) regardless of how the chunks are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel_model import ChannelEnsemble, PhaseVector

__all__ = ["McEstimate", "sample_effective_gains", "mc_amr"]

_CHUNK = 1 << 17

_SCENARIOS = ("non_cooperative", "cooperative")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.n_samples < 10_000:
            raise ValueError(f"need at least 1e4 samples, got {self.n_samples}")


def _gain_chunks(ensemble: ChannelEnsemble, phases: PhaseVector, n: int, seed: int):
    """Yield (chunk, K) arrays of instantaneous SNRs."""
    # f^H h_k = f^H R_k^(1/2) g_k = <a_k, g_k> with a_k = R_k^(1/2) f
    a = np.einsum("kij,j->ki", ensemble.sqrt_correlations(), phases.f)
    rng = np.random.default_rng(seed)
    k, nn = ensemble.K, ensemble.N
    remaining = n
    while remaining > 0:
        m = min(_CHUNK, remaining)
        g = rng.standard_normal((m, k, nn)) + 1j * rng.standard_normal((m, k, nn))
        g /= math.sqrt(2.0)
        z = np.einsum("mki,ki->mk", g, np.conj(a))
        yield ensemble.gamma_bar * (z.real**2 + z.imag**2)
        remaining -= m


def sample_effective_gains(
    ensemble: ChannelEnsemble, phases: PhaseVector, n: int, seed: int
) -> np.ndarray:
    """n x K matrix of instantaneous per-user SNRs (exponential marginals)."""
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n}")
    return np.concatenate(list(_gain_chunks(ensemble, phases, n, seed)), axis=0)


def mc_amr(
    ensemble: ChannelEnsemble,
    phases: PhaseVector,
    info,
    scenario: str,
    n: int,
    seed: int,
) -> McEstimate:
    """Empirical average multicast rate with its standard error.

    ``scenario`` selects the per-sample SNR reduction: the minimum over users
    (each decodes alone) or the sum (joint maximal-ratio detection). The same
    seed yields the same channel draws for both scenarios, so paired
    comparisons share randomness.
    """
    if scenario not in _SCENARIOS:
        raise ValueError(f"scenario must be one of {_SCENARIOS}, got {scenario!r}")
    if n < 10_000:
        raise ValueError(f"need at least 1e4 samples, got {n}")
    sums = []
    sq_sums = []
    for gains in _gain_chunks(ensemble, phases, n, seed):
        snr = gains.min(axis=1) if scenario == "non_cooperative" else gains.sum(axis=1)
        vals = info.mi(snr)
        sums.append(float(vals.sum()))
        sq_sums.append(float(np.square(vals).sum()))
    total = math.fsum(sums)
    total_sq = math.fsum(sq_sums)
    mean = total / n
    var = max(total_sq - n * mean * mean, 0.0) / (n - 1)
    return McEstimate(mean=mean, std_error=math.sqrt(var / n), n_samples=n, seed=seed)

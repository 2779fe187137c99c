"""Conjugate-gradient ascent on the torus of unit-modulus phase vectors.

The feasible set {phi : |phi_n| = 1} is a product of circles. Tangent vectors
at phi are exactly those with Re(t_n conj(phi_n)) = 0 per entry; projection
drops the radial component elementwise, transport re-projects at the new
point, and the retraction renormalizes each entry to unit modulus.

Gradients follow the Wirtinger convention g = df/d(conj(phi)), so the
directional derivative of a real objective along a tangent direction d is
2 Re<g, d>. Two objectives are provided: the harmonic-composite SNR
(weakest-user surrogate) and the sum of log beamforming gains (joint-decoding
surrogate, what the cooperative array gain maximizes). The search direction
mixes the new gradient with the transported previous direction using a
nonnegative Polak-Ribiere coefficient, restarting to steepest ascent whenever
the mixed direction ascends slower than half the gradient itself; with the
Armijo test on the directional derivative this guarantees every accepted step
increases the objective by at least c1 * alpha * ||grad||^2.

Single runs are sequential; multistart runs are independent given per-run
seeds and parallelize trivially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel_model import ChannelEnsemble, PhaseVector

__all__ = [
    "RmCgdConfig",
    "RmCgdResult",
    "CompositeSnrObjective",
    "LogGainSumObjective",
    "composite_snr",
    "composite_snr_grad",
    "log_gain_sum",
    "log_gain_sum_grad",
    "riemannian_grad",
    "transport",
    "retract",
    "rm_cgd",
    "rm_cgd_multistart",
]


@dataclass(frozen=True)
class RmCgdConfig:
    max_iters: int = 200
    grad_tol: float = 1e-6
    armijo_c1: float = 1e-4
    armijo_ratio: float = 0.5
    armijo_step0: float = 1.0
    max_backtracks: int = 50
    pr_restart: bool = True

    def __post_init__(self):
        if self.max_iters < 1 or self.max_backtracks < 1:
            raise ValueError("iteration limits must be positive")
        if self.grad_tol <= 0.0 or self.armijo_c1 <= 0.0 or self.armijo_step0 <= 0.0:
            raise ValueError("tolerances and step sizes must be positive")
        if not 0.0 < self.armijo_ratio < 1.0:
            raise ValueError(f"backtracking ratio must be in (0, 1), got {self.armijo_ratio}")


def _gains(phi: np.ndarray, ensemble: ChannelEnsemble) -> np.ndarray:
    """Quadratic forms phi^H R_k phi with the nulled-user guard."""
    q = np.real(np.einsum("i,kij,j->k", np.conj(phi), ensemble.correlations, phi))
    traces = np.real(np.trace(ensemble.correlations, axis1=1, axis2=2))
    from .channel_model import NulledUserError, _NULL_EPS

    nulled = q <= _NULL_EPS * traces
    if np.any(nulled):
        raise NulledUserError(f"users {np.nonzero(nulled)[0].tolist()} are nulled by phi")
    return q


def composite_snr(phi: np.ndarray, ensemble: ChannelEnsemble) -> float:
    """Harmonic-composite SNR (sum_k (N / gamma_bar) / (phi^H R_k phi))^-1."""
    q = _gains(phi, ensemble)
    n = ensemble.N
    return 1.0 / float(np.sum((n / ensemble.gamma_bar) / q))


def composite_snr_grad(phi: np.ndarray, ensemble: ChannelEnsemble) -> np.ndarray:
    """Wirtinger gradient of composite_snr: value^2 * sum_k (N/gbar) R_k phi / q_k^2."""
    q = _gains(phi, ensemble)
    n = ensemble.N
    scale = n / ensemble.gamma_bar
    total = float(np.sum(scale / q))
    rphi = np.einsum("kij,j->ki", ensemble.correlations, phi)
    return (total**-2) * np.einsum("k,ki->i", scale / q**2, rphi)


def log_gain_sum(phi: np.ndarray, ensemble: ChannelEnsemble) -> float:
    """Sum of log beamforming gains sum_k log(phi^H R_k phi)."""
    return float(np.sum(np.log(_gains(phi, ensemble))))


def log_gain_sum_grad(phi: np.ndarray, ensemble: ChannelEnsemble) -> np.ndarray:
    """Wirtinger gradient of log_gain_sum: sum_k R_k phi / (phi^H R_k phi)."""
    q = _gains(phi, ensemble)
    rphi = np.einsum("kij,j->ki", ensemble.correlations, phi)
    return np.einsum("k,ki->i", 1.0 / q, rphi)


class CompositeSnrObjective:
    """Maximizing this maximizes the weakest-user average multicast rate."""

    kind = "composite-snr"

    def __init__(self, ensemble: ChannelEnsemble):
        self.ensemble = ensemble

    def value(self, phi: np.ndarray) -> float:
        return composite_snr(phi, self.ensemble)

    def euclid_grad(self, phi: np.ndarray) -> np.ndarray:
        return composite_snr_grad(phi, self.ensemble)


class LogGainSumObjective:
    """Maximizing this maximizes the cooperative high-SNR array gain."""

    kind = "log-gain-sum"

    def __init__(self, ensemble: ChannelEnsemble):
        self.ensemble = ensemble

    def value(self, phi: np.ndarray) -> float:
        return log_gain_sum(phi, self.ensemble)

    def euclid_grad(self, phi: np.ndarray) -> np.ndarray:
        return log_gain_sum_grad(phi, self.ensemble)


def riemannian_grad(euclid: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Project a Euclidean gradient onto the tangent space at phi."""
    return euclid - np.real(euclid * np.conj(phi)) * phi


def transport(eta_prev: np.ndarray, phi_new: np.ndarray) -> np.ndarray:
    """Carry a tangent vector to the tangent space at phi_new (projection)."""
    return eta_prev - np.real(eta_prev * np.conj(phi_new)) * phi_new


def retract(phi: np.ndarray, direction: np.ndarray, step: float) -> np.ndarray:
    """Move along a direction and renormalize each entry to unit modulus.

    A zero entry (impossible for tangent directions, possible for arbitrary
    ones) halves the step up to 30 times before failing.
    """
    for _ in range(31):
        cand = phi + step * direction
        mags = np.abs(cand)
        if np.all(mags > 0.0):
            return cand / mags
        step *= 0.5
    raise RuntimeError("retraction hit a zero entry even after 30 step halvings")


def _inner(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.real(np.vdot(u, v)))


@dataclass
class RmCgdResult:
    phases: PhaseVector
    objective_trace: np.ndarray
    grad_norms: np.ndarray
    step_sizes: np.ndarray
    converged: bool
    line_search_failed: bool
    iterations: int

    @property
    def trace(self) -> np.ndarray:
        return self.objective_trace


def rm_cgd(objective, start: PhaseVector, config: RmCgdConfig | None = None) -> RmCgdResult:
    """Conjugate-gradient ascent from ``start`` until the tangent gradient
    norm falls below config.grad_tol or max_iters is exhausted.

    The objective trace is non-decreasing; on a line-search failure the best
    point so far is returned with the flag set.
    """
    cfg = config or RmCgdConfig()
    phi = start.phi.astype(complex)
    f_val = objective.value(phi)
    g = riemannian_grad(objective.euclid_grad(phi), phi)
    eta = g.copy()

    trace = [f_val]
    grad_norms = [float(np.linalg.norm(g))]
    steps = []
    converged = grad_norms[0] < cfg.grad_tol
    failed = False

    it = 0
    while not converged and it < cfg.max_iters:
        g_norm_sq = _inner(g, g)
        dirderiv = 2.0 * _inner(g, eta)
        if dirderiv < g_norm_sq:
            eta = g.copy()
            dirderiv = 2.0 * g_norm_sq

        alpha = cfg.armijo_step0
        accepted = False
        cand = retract(phi, eta, alpha)
        f_cand = objective.value(cand)
        if f_cand >= f_val + cfg.armijo_c1 * alpha * dirderiv:
            accepted = True
            # expand while the sufficient-increase test keeps holding, so the
            # step is not pinned to the unit initial guess far from optimum
            for _ in range(cfg.max_backtracks):
                alpha_try = alpha / cfg.armijo_ratio
                cand_try = retract(phi, eta, alpha_try)
                f_try = objective.value(cand_try)
                if f_try >= f_val + cfg.armijo_c1 * alpha_try * dirderiv and f_try >= f_cand:
                    alpha, cand, f_cand = alpha_try, cand_try, f_try
                else:
                    break
        else:
            for _ in range(cfg.max_backtracks):
                alpha *= cfg.armijo_ratio
                cand = retract(phi, eta, alpha)
                f_cand = objective.value(cand)
                if f_cand >= f_val + cfg.armijo_c1 * alpha * dirderiv:
                    accepted = True
                    break
        if not accepted:
            failed = True
            break

        g_new = riemannian_grad(objective.euclid_grad(cand), cand)
        if cfg.pr_restart:
            g_moved = transport(g, cand)
            zeta = max(_inner(g_new, g_new - g_moved) / g_norm_sq, 0.0)
        else:
            zeta = _inner(g_new, g_new) / g_norm_sq
        eta = g_new + zeta * transport(eta, cand)

        phi, f_val, g = cand, f_cand, g_new
        it += 1
        trace.append(f_val)
        grad_norms.append(float(np.linalg.norm(g)))
        steps.append(alpha)
        converged = grad_norms[-1] < cfg.grad_tol

    return RmCgdResult(
        phases=PhaseVector.from_phi(phi),
        objective_trace=np.asarray(trace),
        grad_norms=np.asarray(grad_norms),
        step_sizes=np.asarray(steps),
        converged=converged,
        line_search_failed=failed,
        iterations=it,
    )


def rm_cgd_multistart(
    objective,
    n: int,
    n_starts: int,
    seed: int,
    config: RmCgdConfig | None = None,
    extra_starts: list[PhaseVector] | None = None,
):
    """Independent seeded restarts; returns (best result by objective, all results)."""
    rng = np.random.default_rng(seed)
    starts = [PhaseVector.random(n, rng) for _ in range(n_starts)]
    if extra_starts:
        starts.extend(extra_starts)
    results = [rm_cgd(objective, s, config) for s in starts]
    best = max(results, key=lambda r: r.objective_trace[-1])
    return best, results

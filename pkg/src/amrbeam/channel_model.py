"""Statistical channel state: correlation matrices, effective SNRs, SNR laws.

The transmitter only knows second-order statistics (one Hermitian PSD
correlation matrix per user) plus the average SNR. Beamforming with a
unit-modulus phase vector phi (f = phi / sqrt(N)) turns each user's channel
into a scalar Rayleigh link whose instantaneous SNR is exponential with mean

    gamma_k = gamma_bar * phi^H R_k phi / N.

Two composite laws matter downstream: the minimum over users (exponential with
the harmonic-composite mean) and the sum over users (maximal-ratio combining),
whose density is expanded in a single gamma series with recursively computed
coefficients. All objects here are immutable after construction; Monte Carlo
sampling lives in mc_sim and takes explicit seeded generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import gammainc, gammaln

from .quadrature import gauss_hermite

__all__ = [
    "NulledUserError",
    "TruncationError",
    "PhaseVector",
    "ChannelEnsemble",
    "MrcLaw",
    "MinSnrLaw",
    "wrap_phase",
    "make_correlation",
    "make_ensemble",
    "effective_snrs",
    "min_snr_law",
    "mrc_law",
]

# Quadratic forms at or below this fraction of trace(R_k) count as a nulled user.
_NULL_EPS = 1e-12
_MAX_SERIES_TERMS = 10_000


class NulledUserError(ValueError):
    """A beamformer placed a user inside the null space of its correlation."""


class TruncationError(RuntimeError):
    """The gamma-series failed to reach the requested tail mass."""


def wrap_phase(theta):
    """Wrap angles to (-pi, pi]."""
    theta = np.asarray(theta, dtype=float)
    wrapped = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


@dataclass(frozen=True)
class PhaseVector:
    """N phase shifts theta_n in (-pi, pi].

    The induced unit-modulus vector is phi_n = exp(-j theta_n) and the
    beamformer is f = phi / sqrt(N), so ||f|| = 1 by construction.
    """

    thetas: np.ndarray

    def __post_init__(self):
        t = wrap_phase(np.asarray(self.thetas, dtype=float).ravel())
        if t.size == 0:
            raise ValueError("empty phase vector")
        object.__setattr__(self, "thetas", t)

    @property
    def n(self) -> int:
        return self.thetas.size

    @property
    def phi(self) -> np.ndarray:
        return np.exp(-1j * self.thetas)

    @property
    def f(self) -> np.ndarray:
        return self.phi / math.sqrt(self.n)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "PhaseVector":
        return cls(rng.uniform(-np.pi, np.pi, n))

    @classmethod
    def from_phi(cls, phi: np.ndarray) -> "PhaseVector":
        return cls(-np.angle(np.asarray(phi, dtype=complex)))


def make_correlation(
    model: str,
    n: int,
    *,
    rho: float | None = None,
    mu: float = 0.0,
    angle: float | None = None,
    spread: float | None = None,
    hermite_order: int = 200,
) -> np.ndarray:
    """One Hermitian PSD correlation matrix with unit diagonal.

    ``exponential``: R[i, j] = rho^|i-j| exp(j (i-j) mu) with 0 <= rho < 1.
    ``local_scattering``: half-wavelength ULA facing a scatterer cluster at
    ``angle`` (radians) with Gaussian angular offsets of std ``spread``;
    R[i, j] = E_delta exp(j pi (i-j) sin(angle + delta)), evaluated by
    Gauss-Hermite and clipped onto the PSD cone.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 antennas, got {n}")
    idx = np.arange(n)
    lag = idx[:, None] - idx[None, :]

    if model == "exponential":
        if rho is None or not 0.0 <= rho < 1.0:
            raise ValueError(f"exponential model needs 0 <= rho < 1, got {rho}")
        return (rho ** np.abs(lag)) * np.exp(1j * lag * mu)

    if model == "local_scattering":
        if angle is None or spread is None or spread <= 0.0:
            raise ValueError("local_scattering model needs angle and spread > 0")
        rule = gauss_hermite(hermite_order)
        deltas = math.sqrt(2.0) * spread * rule.nodes
        w = rule.weights / math.sqrt(math.pi)
        sines = np.sin(angle + deltas)
        lags = np.exp(1j * np.pi * np.arange(n)[:, None] * sines[None, :]) @ w
        r = lags[np.abs(lag)]
        r = np.where(lag < 0, np.conj(r), r)
        # roundoff can leave eigenvalues barely negative; clip onto the PSD cone
        vals, vecs = np.linalg.eigh(r)
        r = (vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T
        return 0.5 * (r + r.conj().T)

    raise ValueError(f"unknown correlation model {model!r}")


@dataclass(eq=False)
class ChannelEnsemble:
    """Per-user correlation matrices plus the average SNR (the statistical CSI)."""

    correlations: np.ndarray
    snr_db: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.correlations, dtype=complex)
        if r.ndim != 3 or r.shape[1] != r.shape[2]:
            raise ValueError(f"correlations must be (K, N, N), got {r.shape}")
        herm_err = np.max(np.abs(r - np.conj(np.transpose(r, (0, 2, 1)))))
        if herm_err > 1e-12:
            raise ValueError(f"correlation matrices not Hermitian (residual {herm_err:.2e})")
        cleaned = np.empty_like(r)
        for k in range(r.shape[0]):
            vals, vecs = np.linalg.eigh(r[k])
            if vals.min() < -1e-10:
                raise ValueError(f"correlation {k} has eigenvalue {vals.min():.2e} < -1e-10")
            vals = np.clip(vals, 0.0, None)
            if vals.sum() <= 0.0:
                raise ValueError(f"correlation {k} has non-positive trace")
            m = (vecs * vals) @ vecs.conj().T
            cleaned[k] = 0.5 * (m + m.conj().T)
        self.correlations = cleaned
        self._sqrt = None

    @property
    def K(self) -> int:
        return self.correlations.shape[0]

    @property
    def N(self) -> int:
        return self.correlations.shape[1]

    @property
    def gamma_bar(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    def with_snr_db(self, snr_db: float) -> "ChannelEnsemble":
        return ChannelEnsemble(self.correlations, float(snr_db), dict(self.metadata))

    def sqrt_correlations(self) -> np.ndarray:
        """Hermitian PSD square roots R_k^{1/2} (cached)."""
        if self._sqrt is None:
            out = np.empty_like(self.correlations)
            for k in range(self.K):
                vals, vecs = np.linalg.eigh(self.correlations[k])
                out[k] = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T
            self._sqrt = out
        return self._sqrt

    def to_json(self) -> dict:
        return {
            "snr_db": self.snr_db,
            "metadata": self.metadata,
            "correlations": [
                [[[float(v.real), float(v.imag)] for v in row] for row in mat]
                for mat in self.correlations
            ],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ChannelEnsemble":
        mats = np.asarray(payload["correlations"], dtype=float)
        corr = mats[..., 0] + 1j * mats[..., 1]
        return cls(corr, float(payload["snr_db"]), dict(payload.get("metadata", {})))


def make_ensemble(
    k: int,
    n: int,
    snr_db: float,
    *,
    model: str = "exponential",
    seed: int = 0,
    rho: float = 0.7,
    spread: float = 0.1745,
) -> ChannelEnsemble:
    """Draw K per-user correlation matrices from one model family.

    ``exponential`` draws a per-user phase progression mu_k uniform on
    (-pi, pi]; ``local_scattering`` draws a per-user nominal angle uniform on
    (-pi/2, pi/2). Generation is deterministic in (model, seed) and recorded in
    the ensemble metadata.
    """
    rng = np.random.default_rng(seed)
    meta = {"model": model, "seed": int(seed), "k": int(k), "n": int(n)}
    mats = []
    if model == "exponential":
        mus = rng.uniform(-np.pi, np.pi, k)
        meta["rho"] = float(rho)
        meta["mu"] = [float(m) for m in mus]
        for m in mus:
            mats.append(make_correlation("exponential", n, rho=rho, mu=float(m)))
    elif model == "local_scattering":
        angles = rng.uniform(-np.pi / 2, np.pi / 2, k)
        meta["spread"] = float(spread)
        meta["angles"] = [float(a) for a in angles]
        for a in angles:
            mats.append(make_correlation("local_scattering", n, angle=float(a), spread=spread))
    else:
        raise ValueError(f"unknown correlation model {model!r}")
    return ChannelEnsemble(np.stack(mats), float(snr_db), meta)


def quadratic_forms(ensemble: ChannelEnsemble, phases: PhaseVector) -> np.ndarray:
    """Per-user beamforming gains q_k = f^H R_k f (>= 0, SNR-normalized).

    Raises NulledUserError when any q_k falls below 1e-12 * trace(R_k) / N;
    the multicast rate is then zero and optimizers must treat the
    configuration as worst-case.
    """
    f = phases.f
    if phases.n != ensemble.N:
        raise ValueError(f"phase vector has {phases.n} entries, ensemble has N={ensemble.N}")
    q = np.real(np.einsum("i,kij,j->k", np.conj(f), ensemble.correlations, f))
    traces = np.real(np.trace(ensemble.correlations, axis1=1, axis2=2))
    nulled = q <= _NULL_EPS * traces / ensemble.N
    if np.any(nulled):
        raise NulledUserError(f"users {np.nonzero(nulled)[0].tolist()} are nulled by the beamformer")
    return q


def effective_snrs(ensemble: ChannelEnsemble, phases: PhaseVector) -> np.ndarray:
    """Per-user average SNRs gamma_k = gamma_bar * f^H R_k f."""
    return ensemble.gamma_bar * quadratic_forms(ensemble, phases)


class MinSnrLaw(NamedTuple):
    """Distribution of the minimum per-user SNR (exponential)."""

    pdf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    gamma_non: float


def min_snr_law(gammas) -> MinSnrLaw:
    """Law of min_k gamma_k for independent exponentials with means gammas.

    The minimum is exponential with the harmonic composite mean
    gamma_non = (sum_k 1/gamma_k)^{-1}.
    """
    g = np.asarray(gammas, dtype=float)
    if g.size == 0 or np.any(g <= 0.0):
        raise ValueError("per-user SNRs must be positive")
    gamma_non = 1.0 / np.sum(1.0 / g)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, np.exp(-x / gamma_non) / gamma_non, 0.0)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, -np.expm1(-x / gamma_non), 0.0)

    return MinSnrLaw(pdf=pdf, cdf=cdf, gamma_non=float(gamma_non))


@dataclass(eq=False)
class MrcLaw:
    """Gamma-series law of the summed SNR gamma_mrc = sum_k gamma_k.

    The density is a mixture of Erlang/gamma components with common scale
    gamma_min: sum_l c_l * Gamma(K + l, gamma_min), where the mixture masses
    c_l = psi_l * prod_k(gamma_min / gamma_k) follow the same recursion as the
    series coefficients psi_l but stay in [0, 1], which sidesteps overflow for
    large K or strong SNR disparity. tail_bound is the exact mass left out by
    the truncation (the full masses sum to 1).
    """

    gammas: np.ndarray
    gamma_min: float
    psi: np.ndarray
    L: int
    tail_bound: float
    coeffs: np.ndarray

    @property
    def K(self) -> int:
        return self.gammas.size

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x).astype(float)
        out = np.zeros_like(x)
        pos = x > 0.0
        if pos.any():
            xl = x[pos]
            l = np.arange(self.L + 1)
            shape = self.K + l
            with np.errstate(divide="ignore"):
                logc = np.where(self.coeffs > 0.0, np.log(self.coeffs), -np.inf)
            logt = (
                logc[:, None]
                + (shape[:, None] - 1.0) * np.log(xl)[None, :]
                - xl[None, :] / self.gamma_min
                - shape[:, None] * math.log(self.gamma_min)
                - gammaln(shape)[:, None]
            )
            out[pos] = np.exp(logt).sum(axis=0)
        if self.K == 1 and np.any(x == 0.0):
            out[x == 0.0] = self.coeffs[0] / self.gamma_min
        return float(out[0]) if scalar else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x).astype(float)
        out = np.zeros_like(x)
        pos = x > 0.0
        if pos.any():
            shape = self.K + np.arange(self.L + 1)
            comp = gammainc(shape[:, None], x[pos][None, :] / self.gamma_min)
            out[pos] = self.coeffs @ comp
        return float(out[0]) if scalar else out


def mrc_law(gammas, tol: float = 1e-10) -> MrcLaw:
    """Build the summed-SNR law, truncating once the left-out mass is < tol.

    The truncation bound is exact: each series term contributes a known
    nonnegative probability mass and the full masses sum to one, so the
    remainder is 1 minus the accumulated mass.
    """
    g = np.asarray(gammas, dtype=float)
    if g.size == 0 or np.any(g <= 0.0):
        raise ValueError("per-user SNRs must be positive")
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    gmin = float(g.min())
    beta = 1.0 - gmin / g  # each in [0, 1)

    c0 = float(np.exp(np.sum(np.log(gmin / g))))
    coeffs = [c0]
    acc = c0
    power_sums = []
    beta_pow = np.ones_like(beta)
    tail = 1.0 - acc
    while tail >= tol:
        l = len(coeffs)
        if l > _MAX_SERIES_TERMS:
            raise TruncationError(
                f"gamma series needs more than {_MAX_SERIES_TERMS} terms to reach "
                f"tail mass {tol} (extreme SNR disparity)"
            )
        beta_pow = beta_pow * beta
        power_sums.append(float(beta_pow.sum()))
        s = np.asarray(power_sums[:l])
        c_l = float(np.dot(s, np.asarray(coeffs[l - 1 :: -1]))) / l
        coeffs.append(c_l)
        acc += c_l
        tail = max(1.0 - acc, 0.0)

    c = np.asarray(coeffs)
    with np.errstate(over="ignore"):
        psi = c / c0
    return MrcLaw(
        gammas=g.copy(),
        gamma_min=gmin,
        psi=psi,
        L=len(coeffs) - 1,
        tail_bound=tail,
        coeffs=c,
    )

"""Estimating the Lipschitz constant from past episodes.

Every finished episode ``m`` leaves empirical means whose tightest Lipschitz
constant ``L_hat_m`` is a noisy lower-ish view of the latent ``L_m``. Across
``M`` episodes, a high quantile of the ``L_hat_m`` plus a margin estimates the
class constant ``L`` without the explosion of the running maximum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .core import ArmEmbedding, BanditInstance, tightest_lipschitz


@dataclass(frozen=True)
class EpisodeSummary:
    """What a finished episode leaves behind.

    ``true_lipschitz`` is the latent ``L_m`` of the episode's instance; it is
    known only in simulation and feeds :func:`audit_assumptions`.
    """

    means_hat: np.ndarray
    counts: np.ndarray
    lipschitz_hat: float
    true_lipschitz: Optional[float] = None

    @property
    def min_pulls(self) -> int:
        return int(np.min(self.counts))

    @classmethod
    def from_run(cls, means_hat, counts, emb: ArmEmbedding, true_lipschitz: Optional[float] = None):
        mh = np.asarray(means_hat, dtype=float)
        return cls(
            means_hat=mh,
            counts=np.asarray(counts, dtype=int),
            lipschitz_hat=tightest_lipschitz(mh, emb),
            true_lipschitz=true_lipschitz,
        )


@dataclass(frozen=True)
class EstimatorConfig:
    beta: float
    eps_beta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not self.eps_beta >= 0.0:
            raise ValueError("eps_beta must be nonnegative")

    @property
    def label(self) -> str:
        return f"beta={self.beta:g},eps={self.eps_beta:g}"


@dataclass(frozen=True)
class LearnabilityProfile:
    """Fraction ``alpha`` of episodes within ``eps_alpha`` of L, and minimal pulls ``tau``."""

    alpha: float
    eps_alpha: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        # alpha = 0 is a legal audit outcome; the threshold formulas reject it
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not self.eps_alpha >= 0.0:
            raise ValueError("eps_alpha must be nonnegative")
        if not self.tau >= 0.0:
            raise ValueError("tau must be nonnegative")


def lipschitz_gaps(episodes: Sequence[EpisodeSummary], true_L: float) -> np.ndarray:
    """``xi_m = L - L_m`` for every episode with a recorded latent constant."""
    return np.array([true_L - e.true_lipschitz for e in episodes if e.true_lipschitz is not None])


# ---------------------------------------------------------------- estimators

def _rank(beta: float, M: int) -> int:
    # exact ceil(beta * M); float products like 0.3 * 400 are not trusted
    k = math.ceil(Fraction(str(beta)) * M)
    if not 1 <= k <= M:
        raise ValueError(f"ceil(beta * M) = {k} is outside [1, {M}]")
    return k


def kth_largest(values: Sequence[float], k: int) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.partition(v, v.size - k)[v.size - k])


def quantile_estimator(lipschitz_hats: Sequence[float], cfg: EstimatorConfig) -> float:
    """``ceil(beta M)``-th largest past estimate plus ``eps_beta``."""
    M = len(lipschitz_hats)
    if M == 0:
        raise ValueError("need at least one past episode")
    return kth_largest(lipschitz_hats, _rank(cfg.beta, M)) + cfg.eps_beta


def quantile_trace(lipschitz_hats: Sequence[float], cfg: EstimatorConfig, start: int = 1) -> np.ndarray:
    """Estimator value after each prefix of length ``start..M``.

    Prefixes too short for the rank to exist yield NaN.
    """
    v = np.asarray(lipschitz_hats, dtype=float)
    out = np.full(v.size - start + 1, math.nan)
    for n in range(start, v.size + 1):
        k = math.ceil(Fraction(str(cfg.beta)) * n)
        if 1 <= k <= n:
            out[n - start] = kth_largest(v[:n], k) + cfg.eps_beta
    return out


def max_estimator(lipschitz_hats: Sequence[float]) -> float:
    if len(lipschitz_hats) == 0:
        raise ValueError("need at least one past episode")
    return float(np.max(lipschitz_hats))


def prefix_max(lipschitz_hats: Sequence[float]) -> np.ndarray:
    if len(lipschitz_hats) == 0:
        raise ValueError("need at least one past episode")
    return np.maximum.accumulate(np.asarray(lipschitz_hats, dtype=float))


def online_estimator(means_hat, emb: ArmEmbedding) -> float:
    """Within-episode estimate from the current empirical means."""
    return tightest_lipschitz(means_hat, emb)


# ---------------------------------------------------------- sample complexity

def _margin(cfg: EstimatorConfig, profile: LearnabilityProfile) -> tuple:
    if not cfg.eps_beta > profile.eps_alpha:
        raise ValueError("need eps_beta > eps_alpha")
    if not cfg.beta < profile.alpha:
        raise ValueError("need beta < alpha")
    return cfg.eps_beta - profile.eps_alpha, min(cfg.beta, profile.alpha - cfg.beta)


def required_tau(cfg: EstimatorConfig, profile: LearnabilityProfile, delta_x: float, K: int) -> float:
    """Minimal pulls per arm and episode for the quantile estimator to concentrate."""
    eps, q = _margin(cfg, profile)
    return 4.0 / (delta_x ** 2 * eps ** 2) * (math.log(2 * K) + 1.0 / q)


def required_M(cfg: EstimatorConfig, profile: LearnabilityProfile, K: int, T: int) -> float:
    """Number of past episodes ``2 Z ln(2 Z T)`` with ``Z = 1 / (min(beta, alpha - beta) ln 2K)``."""
    _, q = _margin(cfg, profile)
    Z = 1.0 / (q * math.log(2 * K))
    return 2.0 * Z * math.log(2.0 * Z * T)


def concentration_bound(profile: LearnabilityProfile, cfg: EstimatorConfig, delta_x: float, M: int) -> float:
    """Probability bound for the estimator missing ``[L, L + eps']``, capped at 1."""
    eps, q = _margin(cfg, profile)
    val = 8.0 * M * math.exp(-(delta_x ** 2) * eps ** 2 / 4.0 * q * profile.tau * M)
    return min(1.0, val)


def hoeffding_bound(K: int, delta_x: float, eps: float, tau: float) -> float:
    """Per-episode bound ``2K exp(-delta_x^2 eps^2 tau / 2)`` on ``|L_m - L_hat_m| >= eps``."""
    return min(1.0, 2.0 * K * math.exp(-(delta_x ** 2) * eps ** 2 * tau / 2.0))


def lower_bound_order(delta_x: float, eps: float, eps_alpha: float, alpha: float, T: int) -> float:
    """Order of ``tau M`` any estimator needs on the adversarial pair (constants dropped).

    A non-assertive calculator: ``log T / (delta_x^2 (eps - eps_alpha)^2 alpha)``.
    """
    if not eps > eps_alpha:
        raise ValueError("need eps > eps_alpha")
    return math.log(T) / (delta_x ** 2 * (eps - eps_alpha) ** 2 * alpha)


# -------------------------------------------------------------------- audits

def audit_assumptions(episodes: Sequence[EpisodeSummary], true_L: float, eps_alpha: float) -> LearnabilityProfile:
    """Learnability parameters from the latent per-episode constants."""
    if not episodes:
        raise ValueError("no episodes to audit")
    if any(e.true_lipschitz is None for e in episodes):
        raise ValueError("every episode needs its latent Lipschitz constant")
    close = sum(e.true_lipschitz >= true_L - eps_alpha for e in episodes)
    tau = min(e.min_pulls for e in episodes)
    return LearnabilityProfile(close / len(episodes), eps_alpha, tau)


def audit_assumptions_empirical(
    episodes: Sequence[EpisodeSummary], true_L: float, eps_alpha: float
) -> LearnabilityProfile:
    """Diagnostic variant of :func:`audit_assumptions` that counts ``L_hat_m`` instead of ``L_m``."""
    if not episodes:
        raise ValueError("no episodes to audit")
    close = sum(e.lipschitz_hat >= true_L - eps_alpha for e in episodes)
    return LearnabilityProfile(close / len(episodes), eps_alpha, min(e.min_pulls for e in episodes))


# ------------------------------------------------------------- constructions

def adversarial_pair(
    emb: ArmEmbedding,
    L: float,
    eps: float,
    eps_alpha: float,
    alpha: float,
    M: int,
    c: float = 0.4,
) -> tuple:
    """Two episode sequences no estimator can tell apart with too few samples.

    Arm ``i'`` is one end of the closest pair of arms. In the first sequence
    every episode has ``mu(i') = c + L delta_x`` and ``c`` elsewhere, so every
    ``L_m = L``. The second copies it but raises ``mu(i')`` by
    ``(eps - eps_alpha) delta_x`` in the first ``ceil(alpha M)`` episodes.
    """
    if not 0.0 < c < 1.0:
        raise ValueError("base mean c must lie in (0, 1)")
    if not 0.0 < alpha <= 1.0 or M < 1:
        raise ValueError("need alpha in (0, 1] and M >= 1")
    if not eps > eps_alpha:
        raise ValueError("need eps > eps_alpha")
    K, dx = emb.K, emb.delta_x
    if K < 2:
        raise ValueError("adversarial pair needs at least two arms")
    i_p = int(np.argmin(np.where(np.eye(K, dtype=bool), np.inf, emb.dist)) // K)
    top = c + L * dx
    bump = (eps - eps_alpha) * dx
    if top + bump > 1.0:
        raise ValueError("means overflow 1; lower c or L")
    base = np.full(K, c)
    base[i_p] = top
    pert = base.copy()
    pert[i_p] = top + bump
    n_pert = math.ceil(Fraction(str(alpha)) * M)
    first = [BanditInstance(base) for _ in range(M)]
    second = [BanditInstance(pert if m < n_pert else base) for m in range(M)]
    return first, second


def synthetic_estimates(
    means_list: Sequence[np.ndarray],
    emb: ArmEmbedding,
    tau: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """``L_hat_m`` from ``tau`` Bernoulli pulls per arm of each instance.

    A cheap stand-in for full episodes that meets the minimal-pull assumption
    with equality.
    """
    mu = np.asarray(means_list, dtype=float)
    mh = rng.binomial(tau, mu) / tau
    K = emb.K
    iu = np.triu_indices(K, 1)
    diff = np.abs(mh[:, :, None] - mh[:, None, :])[:, iu[0], iu[1]]
    return (diff / emb.dist[iu]).max(axis=1)


def estimator_miss_frequency(
    means_list: Sequence[np.ndarray],
    emb: ArmEmbedding,
    tau: int,
    cfg: EstimatorConfig,
    true_L: float,
    eps_prime: float,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo frequency of ``l_beta + eps_beta < L`` or ``l_beta > L + eps'``.

    ``l_beta`` is the quantile estimate without its margin, computed from
    synthetic episodes with ``tau`` pulls per arm.
    """
    k = _rank(cfg.beta, len(means_list))
    misses = 0
    for _ in range(trials):
        ell = kth_largest(synthetic_estimates(means_list, emb, tau, rng), k)
        misses += (ell + cfg.eps_beta < true_L) or (ell > true_L + eps_prime)
    return misses / trials

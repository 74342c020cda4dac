"""Directed-exploration policy pi(L) for Lipschitz Bernoulli bandits.

Each round runs one of three phases, in strict precedence:

* Estimation: some arm has at most ``log t / log log t`` pulls, so play the
  least-pulled arm.
* Exploitation: the current exploration rate ``n_t / log t``, shrunk by
  ``1 + margin``, already satisfies the lower-bound constraints built from the
  empirical means, so play the least-pulled empirical best arm.
* Exploration: track the clipped LP allocation and play the arm furthest
  behind its target ``eta_t(i) log t``.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import KL_EPS, TIE_TOL, ArmEmbedding, BanditInstance
from .oracle_lp import LowerBoundSolution, solve_lower_bound

log = logging.getLogger(__name__)

FEAS_TOL = 1e-12


class Phase(enum.Enum):
    ESTIMATION = "Estimation"
    EXPLOITATION = "Exploitation"
    EXPLORATION = "Exploration"


@dataclass(frozen=True)
class PolicyConfig:
    """Parameters of pi(L).

    ``believed_L`` may be ``math.inf`` (no structure). With ``online=True`` the
    believed constant is re-estimated every round from the empirical means and
    ``believed_L`` is ignored. ``clip_set`` picks which best set receives the
    ``log t`` clip: ``"empirical"`` (the default) or ``"true"``, the latter
    requiring ``true_means``.
    """

    believed_L: float = math.inf
    margin: float = 0.1
    est_const: float = 1.0
    clip_const: float = 1.0
    online: bool = False
    clip_set: str = "empirical"
    true_means: Optional[tuple] = None
    cache_lp: bool = True

    def __post_init__(self):
        if not self.margin > 0:
            raise ValueError("margin (lambda) must be positive")
        if not (self.est_const > 0 and self.clip_const > 0):
            raise ValueError("phase multipliers must be positive")
        if not (self.believed_L >= 0):
            raise ValueError("believed_L must be nonnegative")
        if self.clip_set not in ("empirical", "true"):
            raise ValueError("clip_set must be 'empirical' or 'true'")
        if self.clip_set == "true" and self.true_means is None:
            raise ValueError("clip_set='true' needs true_means")

    @property
    def label(self) -> str:
        if self.online:
            return "online"
        return "inf" if math.isinf(self.believed_L) else repr(float(self.believed_L))


@dataclass
class PolicyState:
    emb: ArmEmbedding
    config: PolicyConfig
    t: int = 1
    counts: list = field(default_factory=list)
    means: list = field(default_factory=list)
    lp_failures: int = 0
    _lp_cache: dict = field(default_factory=dict, repr=False)
    dist_rows: list = field(default_factory=list, repr=False)
    true_best: tuple = ()

    @classmethod
    def initial(cls, emb: ArmEmbedding, config: PolicyConfig) -> "PolicyState":
        K = emb.K
        true_best = ()
        if config.true_means is not None:
            true_best = BanditInstance(config.true_means).best_set
        return cls(
            emb=emb,
            config=config,
            counts=[0] * K,
            means=[0.0] * K,
            dist_rows=emb.dist.tolist(),
            true_best=true_best,
        )

    @property
    def K(self) -> int:
        return len(self.counts)

    def current_L(self) -> float:
        if self.config.online:
            m, rows = self.means, self.dist_rows
            return max(
                (abs(m[i] - m[j]) / rows[i][j] for i in range(self.K) for j in range(i + 1, self.K)),
                default=0.0,
            )
        return self.config.believed_L


def loglog_safe(t: int) -> float:
    return max(math.log(math.log(t)), 1.0) if t >= 3 else 1.0


def _argmin(values: Sequence, among: Sequence[int]) -> int:
    best = among[0]
    for i in among:
        if values[i] < values[best]:
            best = i
    return best


def _kl(p: float, q: float) -> float:
    # unchecked scalar KL for the hot path; mirrors core.bernoulli_kl
    q = min(max(q, KL_EPS), 1.0 - KL_EPS)
    if min(max(p, KL_EPS), 1.0 - KL_EPS) == q:
        return 0.0
    out = 0.0
    if p > 0.0:
        out += p * math.log(p / q)
    if p < 1.0:
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return out if out > 0.0 else 0.0


def _best_split(means: list, tol: float = TIE_TOL) -> tuple:
    best = max(means)
    best_set = [i for i, m in enumerate(means) if best - m <= tol]
    sub = [i for i, m in enumerate(means) if best - m > tol]
    return best, best_set, sub


def _feasible(means, best, sub, zeta, dist, L) -> bool:
    """Pure-Python ``in_feasible_set`` for the few-arm hot path."""
    finite = not math.isinf(L)
    for j in sub:
        row = dist[j]
        total = 0.0
        for i in sub:
            z = zeta[i]
            if z <= 0.0:
                continue
            if i == j:
                nu = best
            elif finite:
                nu = max(means[i], best - L * row[i])
            else:
                continue
            if nu > means[i]:
                total += _kl(means[i], nu) * z
        if total < 1.0 - FEAS_TOL:
            return False
    return True


def _solve_cached(state: PolicyState, L: float) -> LowerBoundSolution:
    if not state.config.cache_lp:
        return solve_lower_bound(BanditInstance(state.means), state.emb, L)
    key = (tuple(round(m, 6) for m in state.means), L)
    sol = state._lp_cache.get(key)
    if sol is None:
        sol = solve_lower_bound(BanditInstance(state.means), state.emb, L)
        if len(state._lp_cache) > 4096:
            state._lp_cache.clear()
        state._lp_cache[key] = sol
    return sol


def select_arm(state: PolicyState) -> tuple:
    """Return ``(arm, Phase)`` for round ``state.t``; lowest index breaks ties."""
    cfg = state.config
    t = state.t
    K = state.K
    counts = state.counts
    arms = range(K)

    if t <= max(K, 3):
        return _argmin(counts, arms), Phase.ESTIMATION
    log_t = math.log(t)
    if min(counts) <= cfg.est_const * log_t / loglog_safe(t):
        return _argmin(counts, arms), Phase.ESTIMATION

    means = state.means
    best, best_arms, sub = _best_split(means)
    L = state.current_L()

    if sub:
        scale = log_t * (1.0 + cfg.margin)
        zeta = [c / scale for c in counts]
        feasible = _feasible(means, best, sub, zeta, state.dist_rows, L)
    else:
        feasible = True
    if feasible:
        return _argmin(counts, best_arms), Phase.EXPLOITATION

    sol = _solve_cached(state, L)
    if not sol.ok:
        state.lp_failures += 1
        log.debug("t=%d: LP %s (%s); falling back to estimation", t, sol.status.value, sol.message)
        return _argmin(counts, arms), Phase.ESTIMATION

    eta = sol.allocation.rates
    clipped = state.true_best if cfg.clip_set == "true" else best_arms
    clip = cfg.clip_const * log_t
    best_i, best_score = 0, -math.inf
    for i in arms:
        if i in clipped:
            target = min(clip, eta[i])
        else:
            target = (1.0 + cfg.margin) * eta[i]
        if math.isinf(target):
            # optimal for the (rounded) LP instance but outside the clip set
            target = clip
        score = target * log_t - counts[i]
        if score > best_score:
            best_i, best_score = i, score
    return best_i, Phase.EXPLORATION


def update(state: PolicyState, arm: int, reward: int) -> PolicyState:
    """Record ``reward`` for ``arm`` and advance the round counter."""
    if reward not in (0, 1):
        raise ValueError("Bernoulli rewards must be 0 or 1")
    n = state.counts[arm]
    state.means[arm] += (reward - state.means[arm]) / (n + 1)
    state.counts[arm] = n + 1
    state.t += 1
    return state

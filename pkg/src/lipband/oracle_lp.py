"""Instance-dependent regret lower bound for Lipschitz bandits.

For a Bernoulli instance ``mu`` and Lipschitz constant ``L`` the asymptotic
regret constant ``C(mu, L)`` is the value of

    min  sum_{i suboptimal} (mu_* - mu(i)) eta(i)
    s.t. sum_{i suboptimal} KL(mu(i) || nu^j(i)) eta(i) >= 1   for every suboptimal j
         eta >= 0

with confusing parameters ``nu^j(i) = max(mu(i), mu_* - L d(i, j))``. Optimal
arms get ``eta = inf`` and are not LP variables.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import simplex
from .core import ArmEmbedding, BanditInstance, bernoulli_kl_array
from .simplex import Status as LPStatus

log = logging.getLogger(__name__)

FEAS_TOL = 1e-12
CHECK_TOL = 1e-8

__all__ = [
    "LPStatus",
    "ExplorationAllocation",
    "LowerBoundSolution",
    "confusing_parameter",
    "constraint_matrix",
    "solve_lower_bound",
    "feasibility_margins",
    "in_feasible_set",
    "scale_free_bound",
    "continuity_delta",
]


@dataclass(frozen=True)
class ExplorationAllocation:
    """Exploration rates in pulls per log t; ``inf`` on optimal arms."""

    rates: np.ndarray

    def __post_init__(self):
        r = np.array(self.rates, dtype=float)
        if np.any(np.isnan(r)) or np.any(r < 0):
            raise ValueError("rates must be nonnegative")
        r.setflags(write=False)
        object.__setattr__(self, "rates", r)

    @property
    def optimal(self) -> tuple:
        return tuple(int(i) for i in np.flatnonzero(np.isinf(self.rates)))

    def serialize(self) -> list:
        return ["inf" if math.isinf(v) else repr(float(v)) for v in self.rates]

    @classmethod
    def from_counts(cls, counts, t: int, optimal=()) -> "ExplorationAllocation":
        """Current exploration rate ``n_t / log t`` with optimal arms set to inf."""
        rates = np.asarray(counts, dtype=float) / math.log(t)
        rates[list(optimal)] = math.inf
        return cls(rates)


@dataclass(frozen=True)
class LowerBoundSolution:
    value: float
    allocation: Optional[ExplorationAllocation]
    status: LPStatus
    message: str = ""

    @property
    def ok(self) -> bool:
        """A verified allocation is available (possibly one of several optima)."""
        return self.allocation is not None


def confusing_parameter(instance: BanditInstance, emb: ArmEmbedding, L: float, j: int) -> np.ndarray:
    """Least perturbation of ``instance`` that makes suboptimal arm ``j`` best inside Phi(L)."""
    if j in instance.best_set:
        raise ValueError(f"arm {j} is optimal; confusing parameters exist only for suboptimal arms")
    mu = instance.means
    nu = mu.copy()
    if math.isinf(L):
        nu[j] = instance.best_value
        return nu
    nu = np.maximum(mu, instance.best_value - L * emb.dist[:, j])
    nu[j] = instance.best_value
    return nu


def constraint_matrix(instance: BanditInstance, emb: ArmEmbedding, L: float) -> np.ndarray:
    """KL coefficients: row r is confusing arm ``suboptimal[r]``, column c is arm ``suboptimal[c]``."""
    sub = list(instance.suboptimal)
    if not sub:
        return np.zeros((0, 0))
    mu = instance.means[sub]
    best = instance.best_value
    if math.isinf(L):
        nu = np.broadcast_to(mu, (len(sub), len(sub))).copy()
    else:
        d = emb.dist[np.ix_(sub, sub)]
        # d[j, i] = d[i, j]; row j holds nu^j restricted to suboptimal arms
        nu = np.maximum(mu[None, :], best - L * d)
    np.fill_diagonal(nu, best)
    return bernoulli_kl_array(mu[None, :], nu)


def _verify(A, gaps, eta, value) -> str:
    if np.any(A @ eta - 1.0 < -CHECK_TOL * max(1.0, float(np.abs(A @ eta).max()))):
        return "allocation violates a constraint"
    obj = float(gaps @ eta)
    if abs(obj - value) > CHECK_TOL * max(1.0, abs(value)):
        return f"objective {obj!r} disagrees with dual value {value!r}"
    return ""


def solve_lower_bound(instance: BanditInstance, emb: ArmEmbedding, L: float) -> LowerBoundSolution:
    """Compute C(mu, L) and the exploration allocation eta(mu, L)."""
    K = instance.K
    sub = list(instance.suboptimal)
    rates = np.full(K, math.inf)
    if not sub:
        return LowerBoundSolution(0.0, ExplorationAllocation(rates), LPStatus.OPTIMAL, "no suboptimal arm")
    A = constraint_matrix(instance, emb, L)
    zero_rows = np.flatnonzero(~np.any(A > 0.0, axis=1))
    if zero_rows.size:
        bad = [sub[r] for r in zero_rows]
        return LowerBoundSolution(
            math.inf, None, LPStatus.INFEASIBLE, f"no arm carries information against arms {bad}"
        )
    gaps = instance.gaps[sub]
    # dual: max 1'y s.t. A' y <= gaps, y >= 0; its shadow prices are eta
    res = simplex.maximize(np.ones(len(sub)), A.T, gaps)
    if res.status is LPStatus.UNBOUNDED:
        return LowerBoundSolution(math.inf, None, LPStatus.INFEASIBLE, "numerically infeasible constraint set")
    if res.status is not LPStatus.OPTIMAL:
        return LowerBoundSolution(math.nan, None, LPStatus.DEGENERATE, "simplex did not converge")
    eta = res.duals
    problem = _verify(A, gaps, eta, res.value)
    if problem:
        log.debug("lower-bound LP rejected: %s", problem)
        return LowerBoundSolution(math.nan, None, LPStatus.DEGENERATE, problem)
    rates[sub] = eta
    status = LPStatus.DEGENERATE if res.degenerate_basis else LPStatus.OPTIMAL
    msg = "optimum may not be unique" if res.degenerate_basis else ""
    return LowerBoundSolution(float(gaps @ eta), ExplorationAllocation(rates), status, msg)


def _rates(zeta) -> np.ndarray:
    if isinstance(zeta, ExplorationAllocation):
        return zeta.rates
    return np.asarray(zeta, dtype=float)


def feasibility_margins(zeta, instance: BanditInstance, emb: ArmEmbedding, L: float) -> np.ndarray:
    """Left-hand side of each constraint evaluated at ``zeta`` (one entry per suboptimal arm)."""
    sub = list(instance.suboptimal)
    if not sub:
        return np.zeros(0)
    z = _rates(zeta)[sub]
    if np.any(~np.isfinite(z)):
        raise ValueError("zeta must be finite on suboptimal arms")
    return constraint_matrix(instance, emb, L) @ z


def in_feasible_set(zeta, instance: BanditInstance, emb: ArmEmbedding, L: float) -> bool:
    """True iff ``zeta`` satisfies every lower-bound constraint (vacuous with no suboptimal arm)."""
    return bool(np.all(feasibility_margins(zeta, instance, emb, L) >= 1.0 - FEAS_TOL))


def scale_free_bound(instance: BanditInstance, L: float, D: int) -> float:
    """Upper bound ``(8 / gap^2) min{K, (8 L sqrt(D) / gap + 1)^D}`` on C(mu, L)."""
    gap = instance.min_gap
    if gap <= 0.0:
        raise ValueError("scale-free bound needs a suboptimal arm")
    K = instance.K
    if math.isinf(L):
        return 8.0 / gap ** 2 * K
    cover = (8.0 * L * math.sqrt(D) / gap + 1.0) ** D
    return 8.0 / gap ** 2 * min(K, cover)


def continuity_delta(instance: BanditInstance, emb: ArmEmbedding, L: float) -> float:
    """Width of the window ``[L, L + delta)`` on which C(mu, .) is continuous.

    Minimum over suboptimal ``i`` and ``j != i`` of ``gap(i) / d(i, j) - L``,
    floored at zero.
    """
    sub = instance.suboptimal
    if not sub:
        return math.inf
    K = instance.K
    best = math.inf
    for i in sub:
        for j in range(K):
            if j != i:
                best = min(best, instance.gaps[i] / emb.dist[i, j] - L)
    return max(0.0, float(best))

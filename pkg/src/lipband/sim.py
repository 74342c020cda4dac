"""Bernoulli environments, episode execution and the chain instance generator."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .core import ArmEmbedding, BanditInstance, tightest_lipschitz
from .policy import Phase, PolicyConfig, PolicyState, select_arm, update

_BLOCK = 4096


class Environment:
    """Bernoulli arms driven by one PCG64 substream per arm.

    The k-th pull of arm ``a`` consumes the k-th uniform of substream ``a``, so
    two policies run with the same seed see the same reward for the same
    (arm, pull index) pair.
    """

    def __init__(self, instance: BanditInstance, seed: Union[int, np.random.SeedSequence]):
        self.instance = instance
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self.seed = ss
        self._means = [float(m) for m in instance.means]
        self._rngs = [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(instance.K)]
        self._buf = [np.empty(0) for _ in range(instance.K)]
        self._pos = [0] * instance.K

    def pull(self, arm: int) -> int:
        pos = self._pos[arm]
        buf = self._buf[arm]
        if pos == buf.size:
            buf = self._buf[arm] = self._rngs[arm].random(_BLOCK)
            pos = 0
        self._pos[arm] = pos + 1
        return 1 if buf[pos] < self._means[arm] else 0


@dataclass(frozen=True)
class OraclePolicy:
    """Self-test policy that always plays a true best arm."""

    arm: int


@dataclass
class EpisodeResult:
    pulls: np.ndarray
    means_hat: np.ndarray
    checkpoints: np.ndarray
    regret_trace: np.ndarray
    phase_counts: dict
    # Online Lipschitz estimate of the empirical means at each checkpoint.
    lipschitz_trace: Optional[np.ndarray] = None
    lp_failures: int = 0

    @property
    def final_regret(self) -> float:
        return float(self.regret_trace[-1]) if self.regret_trace.size else 0.0


def default_checkpoints(T: int, n: int = 100) -> np.ndarray:
    """``n`` log-spaced integer rounds in [10, T], always ending at T."""
    if T <= 10:
        return np.arange(1, T + 1)
    pts = np.unique(np.round(np.geomspace(10, T, n)).astype(int))
    pts[-1] = T
    return pts


def run_episode(
    policy: Union[PolicyConfig, OraclePolicy],
    env: Environment,
    emb: ArmEmbedding,
    T: int,
    checkpoints: Optional[Sequence[int]] = None,
    track_lipschitz: bool = False,
) -> EpisodeResult:
    """Play ``T`` rounds of ``policy`` in ``env`` and trace pseudo-regret."""
    inst = env.instance
    K = inst.K
    if emb.K != K:
        raise ValueError("embedding and instance disagree on K")
    if T < K:
        raise ValueError("horizon must be at least K")
    cps = default_checkpoints(T) if checkpoints is None else np.asarray(sorted(set(checkpoints)), dtype=int)
    if cps.size and (cps[0] < 1 or cps[-1] > T):
        raise ValueError("checkpoints must lie in [1, T]")

    gaps = [float(g) for g in inst.gaps]
    phase_counts = {p.value: 0 for p in Phase}
    regret_trace = np.empty(cps.size)
    lip_trace = np.empty(cps.size) if track_lipschitz and K > 1 else None
    regret = 0.0
    nxt = 0

    if isinstance(policy, OraclePolicy):
        state = PolicyState.initial(emb, PolicyConfig())
        choose = lambda: (policy.arm, Phase.EXPLOITATION)  # noqa: E731
    else:
        state = PolicyState.initial(emb, policy)
        choose = lambda: select_arm(state)  # noqa: E731

    for t in range(1, T + 1):
        arm, phase = choose()
        phase_counts[phase.value] += 1
        update(state, arm, env.pull(arm))
        regret += gaps[arm]
        if nxt < cps.size and cps[nxt] == t:
            regret_trace[nxt] = regret
            if lip_trace is not None:
                lip_trace[nxt] = tightest_lipschitz(state.means, emb)
            nxt += 1

    return EpisodeResult(
        pulls=np.asarray(state.counts, dtype=int),
        means_hat=np.asarray(state.means, dtype=float),
        checkpoints=cps,
        regret_trace=regret_trace,
        phase_counts=phase_counts,
        lipschitz_trace=lip_trace,
        lp_failures=state.lp_failures,
    )


def pseudo_regret(instance: BanditInstance, pulls) -> float:
    return float(np.dot(instance.gaps, np.asarray(pulls, dtype=float)))


def generate_instance(
    emb: ArmEmbedding,
    L: float,
    rng: np.random.Generator,
    bounds: tuple = (0.05, 0.95),
) -> tuple:
    """Sample a mean vector in Phi(L) along a 1-D chain of arms.

    The first mean is uniform on ``bounds``; each next mean is uniform on
    ``[prev - L d, prev + L d]`` intersected with ``bounds``, where ``d`` is
    the distance to the previous arm. Returns ``(instance, L_m)`` with ``L_m``
    the tightest Lipschitz constant of the draw.
    """
    if emb.D != 1 or np.any(np.diff(emb.points[:, 0]) <= 0):
        raise ValueError("chain sampler needs a 1-D embedding sorted by coordinate")
    lo, hi = bounds
    K = emb.K
    mu = np.empty(K)
    mu[0] = rng.uniform(lo, hi)
    for i in range(1, K):
        reach = L * emb.dist[i - 1, i]
        a, b = max(lo, mu[i - 1] - reach), min(hi, mu[i - 1] + reach)
        assert a <= b, "empty sampling interval"
        mu[i] = rng.uniform(a, b)
    inst = BanditInstance(mu)
    return inst, (tightest_lipschitz(inst, emb) if K > 1 else 0.0)

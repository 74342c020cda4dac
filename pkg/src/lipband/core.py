"""Domain types and elementary quantities for Lipschitz bandits.

Arms live at fixed positions in the unit cube; a mean-reward vector belongs to
the Lipschitz class Phi(L) when every pairwise difference of means is at most
``L`` times the Euclidean distance between the two arms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

# Clamping applied to the second KL argument.
KL_EPS = 1e-9
# Two means closer than this are treated as tied for the best arm.
TIE_TOL = 1e-9
# Slack allowed when testing membership in Phi(L).
MEMBER_TOL = 1e-12


def _clamp(q: float) -> float:
    return min(max(q, KL_EPS), 1.0 - KL_EPS)


def bernoulli_kl(p: float, q: float) -> float:
    """KL divergence KL(Ber(p) || Ber(q)) in nats.

    ``q`` is clamped to ``[KL_EPS, 1 - KL_EPS]`` so the result is always
    finite; ``0 log 0`` is taken as 0. Returns exactly 0 when ``p`` and ``q``
    coincide after clamping.
    """
    if p != p or q != q:
        raise ValueError("bernoulli_kl got NaN")
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError(f"probabilities out of range: p={p}, q={q}")
    q = _clamp(q)
    if _clamp(p) == q:
        return 0.0
    out = 0.0
    if p > 0.0:
        out += p * math.log(p / q)
    if p < 1.0:
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return out if out > 0.0 else 0.0


@dataclass(frozen=True)
class ArmEmbedding:
    """Arm positions ``points`` (K x D) with cached Euclidean distances."""

    points: np.ndarray
    dist: np.ndarray = field(init=False, repr=False, compare=False)
    delta_x: float = field(init=False, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a non-empty K x D array")
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise ValueError("arm coordinates must lie in [0, 1]")
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=-1))
        K = pts.shape[0]
        if K > 1:
            off = dist[~np.eye(K, dtype=bool)]
            if np.any(off <= 0.0):
                raise ValueError("duplicate arm positions")
            delta_x = float(off.min())
        else:
            delta_x = math.inf
        pts.setflags(write=False)
        dist.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "delta_x", delta_x)

    @property
    def K(self) -> int:
        return self.points.shape[0]

    @property
    def D(self) -> int:
        return self.points.shape[1]

    @classmethod
    def line(cls, xs: Sequence[float]) -> "ArmEmbedding":
        return cls(np.asarray(xs, dtype=float)[:, None])


@dataclass(frozen=True)
class BanditInstance:
    """Bernoulli bandit with success probabilities ``means``."""

    means: np.ndarray
    tie_tol: float = TIE_TOL
    best_value: float = field(init=False, compare=False)
    best_set: tuple = field(init=False, compare=False)
    suboptimal: tuple = field(init=False, compare=False)
    gaps: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = np.array(self.means, dtype=float).ravel()
        if mu.size == 0:
            raise ValueError("instance needs at least one arm")
        if np.any(np.isnan(mu)) or np.any(mu < 0.0) or np.any(mu > 1.0):
            raise ValueError("means must lie in [0, 1]")
        best = float(mu.max())
        gaps = best - mu
        is_best = gaps <= self.tie_tol
        mu.setflags(write=False)
        gaps.setflags(write=False)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "best_value", best)
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "best_set", tuple(int(i) for i in np.flatnonzero(is_best)))
        object.__setattr__(self, "suboptimal", tuple(int(i) for i in np.flatnonzero(~is_best)))

    @property
    def K(self) -> int:
        return self.means.size

    @property
    def min_gap(self) -> float:
        """Smallest suboptimality gap (0 when every arm is optimal)."""
        if not self.suboptimal:
            return 0.0
        return float(self.gaps[list(self.suboptimal)].min())

    @property
    def max_gap(self) -> float:
        """Largest gap ``mu_* - min_i mu(i)``; used by the regret decomposition."""
        return float(self.gaps.max())


MeansLike = Union[BanditInstance, Sequence[float], np.ndarray]


def _means(x: MeansLike) -> np.ndarray:
    if isinstance(x, BanditInstance):
        return x.means
    return np.asarray(x, dtype=float)


def tightest_lipschitz(instance: MeansLike, emb: ArmEmbedding) -> float:
    """Smallest L with ``instance`` in Phi(L): max |mu(i)-mu(j)| / d(i,j)."""
    mu = _means(instance)
    K = mu.size
    if K < 2:
        raise ValueError("tightest_lipschitz needs at least two arms")
    if emb.K != K:
        raise ValueError(f"embedding has {emb.K} arms, instance has {K}")
    iu = np.triu_indices(K, 1)
    num = np.abs(mu[:, None] - mu[None, :])[iu]
    return float((num / emb.dist[iu]).max())


def is_member(instance: MeansLike, emb: ArmEmbedding, L: float) -> bool:
    """True iff the instance lies in Phi(L); ``L = math.inf`` is the unstructured class."""
    if math.isinf(L) or _means(instance).size < 2:
        return True
    return tightest_lipschitz(instance, emb) <= L + MEMBER_TOL


def bernoulli_kl_array(p, q) -> np.ndarray:
    """Elementwise :func:`bernoulli_kl` for broadcastable arrays."""
    p = np.asarray(p, dtype=float)
    q = np.clip(np.asarray(q, dtype=float), KL_EPS, 1.0 - KL_EPS)
    p, q = np.broadcast_arrays(p, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        head = np.where(p > 0.0, p * np.log(p / q), 0.0)
        tail = np.where(p < 1.0, (1.0 - p) * np.log((1.0 - p) / (1.0 - q)), 0.0)
    out = head + tail
    out[np.clip(p, KL_EPS, 1.0 - KL_EPS) == q] = 0.0
    return np.maximum(out, 0.0)

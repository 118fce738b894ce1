"""Assignment rules and the empirical losses built on them.

A partitioned density is K Gaussian components, mixing weights, and a rule
``F`` mapping each point to a cluster (deterministically for WTA rules,
randomly for the posterior rule). Losses are in bits.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .density import LOG2E, Dataset, Gaussian1D, _logsumexp2, log_density


class Rule(enum.Enum):
    WTA = "wta"
    WEIGHTED_WTA = "weighted_wta"
    POSTERIOR = "posterior"

    @property
    def deterministic(self) -> bool:
        return self is not Rule.POSTERIOR

    @classmethod
    def parse(cls, value) -> "Rule":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for r in cls:
            if key in (r.value, r.name.lower()):
                return r
        raise ValueError(f"unknown assignment rule {value!r}")


@dataclass(frozen=True)
class PartitionedDensity:
    components: tuple[Gaussian1D, ...]
    alphas: tuple[float, ...]
    rule: Rule = Rule.WTA

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 1:
            raise ValueError("need at least one component")
        alphas = tuple(float(a) for a in self.alphas)
        if len(alphas) != len(comps):
            raise ValueError("alphas and components differ in length")
        if any(a < 0 or a > 1 for a in alphas) or abs(math.fsum(alphas) - 1.0) > 1e-9:
            raise ValueError(f"alphas must be a probability vector, got {alphas}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "rule", Rule.parse(self.rule))

    @classmethod
    def make(cls, params: Sequence[Sequence[float]], rule=Rule.WTA, alphas=None):
        """Build from ``(mu, sigma)`` pairs; alphas default to uniform."""
        comps = tuple(Gaussian1D(m, s) for m, s in params)
        if alphas is None:
            alphas = (1.0 / len(comps),) * len(comps)
        return cls(comps, tuple(alphas), Rule.parse(rule))

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def mus(self) -> np.ndarray:
        return np.array([g.mu for g in self.components])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([g.sigma for g in self.components])

    @property
    def log2_alphas(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log2(np.asarray(self.alphas))

    def with_rule(self, rule) -> "PartitionedDensity":
        return PartitionedDensity(self.components, self.alphas, Rule.parse(rule))

    def log2_components(self, x) -> np.ndarray:
        """``log2 P_b(x)`` with shape ``(K, *x.shape)``."""
        x = np.asarray(x, dtype=float)
        return np.stack([np.asarray(log_density(g, x)) for g in self.components])

    def assignment_probs(self, x) -> np.ndarray:
        """``Pr[F(x) = b]`` with shape ``(K, *x.shape)`` for any rule."""
        x = np.asarray(x, dtype=float)
        lp = self.log2_components(x)
        if self.rule is Rule.POSTERIOR:
            s = lp + self.log2_alphas.reshape((-1,) + (1,) * x.ndim)
            return np.exp2(s - _logsumexp2(s, axis=0))
        labels = self.hard_labels(x, lp)
        return (labels[None, ...] == np.arange(self.k).reshape((-1,) + (1,) * x.ndim)).astype(float)

    def hard_labels(self, x, lp=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if lp is None:
            lp = self.log2_components(x)
        if self.rule is Rule.WEIGHTED_WTA:
            lp = lp + self.log2_alphas.reshape((-1,) + (1,) * x.ndim)
        # np.argmax returns the first maximum: ties go to the lower index
        return np.argmax(lp, axis=0)


def assign(pd: PartitionedDensity, x: float):
    """Cluster index for WTA rules, probability vector for the posterior rule."""
    if pd.rule is Rule.POSTERIOR:
        return pd.assignment_probs(float(x))
    return int(pd.hard_labels(float(x)))


def partition_loss_point(pd: PartitionedDensity, x):
    """Expected ``-log2 P_F(x)(x)`` over the rule's randomization (vectorized)."""
    x = np.asarray(x, dtype=float)
    lp = pd.log2_components(x)
    probs = pd.assignment_probs(x)
    # 0 * finite only; log densities are finite for Gaussians
    out = -np.sum(probs * lp, axis=0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EmpiricalLosses:
    partition_loss: float
    weighted_kmeans_loss: float
    posterior_loss: float
    assigned_log_loss: float
    counts: tuple[int, ...]
    n: int

    def weight_term(self, alphas) -> float:
        with np.errstate(divide="ignore"):
            la = np.log2(np.asarray(alphas, dtype=float))
        c = np.asarray(self.counts, dtype=float)
        mask = c > 0
        return float(-np.sum(c[mask] / self.n * la[mask]))


def empirical_losses(pd: PartitionedDensity, data) -> EmpiricalLosses:
    """Dataset means of the partition, weighted K-means and posterior losses.

    ``partition_loss`` uses ``pd.rule``; ``weighted_kmeans_loss`` and
    ``counts`` use the weighted WTA partition under ``pd.alphas``;
    ``posterior_loss`` uses the posterior rule under ``pd.alphas``.
    """
    x = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty dataset")
    lp = pd.log2_components(x)

    part = float(np.mean(partition_loss_point(pd, x)))

    wpd = pd.with_rule(Rule.WEIGHTED_WTA)
    labels = wpd.hard_labels(x, lp)
    assigned = -lp[labels, np.arange(x.size)]
    with np.errstate(divide="ignore"):
        weight = -pd.log2_alphas[labels]
    wkm = float(np.mean(assigned + weight))

    post = float(np.mean(partition_loss_point(pd.with_rule(Rule.POSTERIOR), x)))
    counts = tuple(int(c) for c in np.bincount(labels, minlength=pd.k))
    return EmpiricalLosses(part, wkm, post, float(np.mean(assigned)), counts, int(x.size))


def distortion_equivalence_check(mus: Sequence[float], x: float) -> tuple[float, float]:
    """Distortion ``0.5 * min_b (x - mu_b)^2`` and the unit-sigma WTA partition loss.

    The two satisfy ``loss = distortion * log2(e) + 0.5 * log2(2 pi)``.
    """
    pd = PartitionedDensity.make([(m, 1.0) for m in mus], Rule.WTA)
    b = assign(pd, x)
    distortion = 0.5 * (x - mus[b]) ** 2
    return distortion, partition_loss_point(pd, x)


def distortion_to_loss(distortion: float) -> float:
    return distortion * LOG2E + 0.5 * math.log2(2.0 * math.pi)

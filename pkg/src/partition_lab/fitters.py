"""K-means (unweighted and weighted), EM, and posterior-loss gradient descent.

Every fitter returns a :class:`FitTrace` whose ``loss`` column is the
algorithm's own objective in bits:

===================  ==================================================
kmeans               mean ``-log2 P_F(x)(x)``, WTA partition
kmeans_weighted      mean ``-log2 alpha_F(x) P_F(x)(x)``, weighted WTA
em / em_weighted     mixture log loss
posterior_descent    mean posterior loss
===================  ==================================================

A candidate state is only accepted when its objective does not exceed the
current one, so recorded objectives never increase.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .density import SIGMA_FLOOR, Dataset, Gaussian1D, MixtureDensity, make_rng
from .partition import PartitionedDensity, Rule

log = logging.getLogger(__name__)

ALGORITHMS = ("kmeans", "kmeans_weighted", "em", "em_weighted", "posterior_descent")
COLLAPSE_MASS = 1e-12


@dataclass
class FitConfig:
    k: int = 2
    init: Sequence[Sequence[float]] | str = "random"
    seed: int = 0
    max_iters: int = 500
    loss_tol: float = 1e-9
    grad_tol: float = 1e-3
    step0: float = 0.1
    shrink: float = 0.5
    armijo: float = 1e-4
    max_shrinks: int = 40

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.loss_tol <= 0 or self.grad_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not isinstance(self.init, str):
            self.init = [tuple(float(v) for v in row) for row in self.init]
            if len(self.init) != self.k:
                raise ValueError(f"init has {len(self.init)} rows for k={self.k}")
        elif self.init != "random":
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class IterRecord:
    iteration: int
    mus: tuple[float, ...]
    sigmas: tuple[float, ...]
    alphas: tuple[float, ...]
    loss: float
    w0: float
    flags: tuple[str, ...] = ()


@dataclass
class FitTrace:
    algorithm: str
    records: list[IterRecord] = field(default_factory=list)
    status: str = "max_iters"

    @property
    def final(self) -> IterRecord:
        return self.records[-1]

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def rule(self) -> Rule:
        if self.algorithm == "kmeans":
            return Rule.WTA
        if self.algorithm == "kmeans_weighted":
            return Rule.WEIGHTED_WTA
        return Rule.POSTERIOR

    def partitioned_density(self, record: IterRecord | None = None) -> PartitionedDensity:
        r = record or self.final
        comps = tuple(Gaussian1D(m, s) for m, s in zip(r.mus, r.sigmas))
        return PartitionedDensity(comps, r.alphas, self.rule)

    def mixture(self, record: IterRecord | None = None) -> MixtureDensity:
        r = record or self.final
        return MixtureDensity(r.alphas, tuple(Gaussian1D(m, s) for m, s in zip(r.mus, r.sigmas)))

    def _header(self) -> list[str]:
        cols = ["iter", "loss"]
        for b in range(len(self.final.mus)):
            cols += [f"mu{b}", f"sigma{b}", f"alpha{b}"]
        return cols + ["w0", "flags"]

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [",".join(self._header())]
        for r in self.records:
            row = [str(r.iteration), f"{r.loss:.17g}"]
            for m, s, a in zip(r.mus, r.sigmas, r.alphas):
                row += [f"{m:.17g}", f"{s:.17g}", f"{a:.17g}"]
            row += [f"{r.w0:.17g}", "|".join(r.flags)]
            lines.append(",".join(row))
        path.write_text("\n".join(lines) + "\n")

    def status_dict(self) -> dict:
        f = self.final
        return {
            "algorithm": self.algorithm,
            "status": self.status,
            "iterations": len(self.records),
            "final": {
                "loss": f.loss,
                "mus": list(f.mus),
                "sigmas": list(f.sigmas),
                "alphas": list(f.alphas),
                "w0": f.w0,
            },
        }

    def write(self, path) -> None:
        """``trace.csv`` at ``path`` plus a ``.json`` terminal-status sidecar."""
        path = Path(path)
        self.to_csv(path)
        path.with_suffix(".json").write_text(json.dumps(self.status_dict(), indent=2) + "\n")


def _points(data) -> np.ndarray:
    x = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=float).ravel()
    return np.ascontiguousarray(x)


def initial_params(x: np.ndarray, cfg: FitConfig):
    """``(mu, sigma, alpha)`` arrays from an explicit init or a seeded random draw.

    Random init puts means at random quantiles of the data and every sigma
    at the data's standard deviation.
    """
    k = cfg.k
    if cfg.init == "random":
        rng = make_rng(cfg.seed)
        levels = np.sort(rng.uniform(0.0, 1.0, size=k))
        mu = np.quantile(x, levels)
        sigma = np.full(k, max(SIGMA_FLOOR, float(np.std(x))))
        alpha = np.full(k, 1.0 / k)
        return mu, sigma, alpha
    rows = cfg.init
    mu = np.array([r[0] for r in rows], dtype=float)
    sigma = np.array([r[1] for r in rows], dtype=float)
    if all(len(r) > 2 for r in rows):
        alpha = np.array([r[2] for r in rows], dtype=float)
        alpha = alpha / alpha.sum()
    else:
        alpha = np.full(k, 1.0 / k)
    if np.any(sigma < SIGMA_FLOOR):
        raise ValueError("initial sigma below SIGMA_FLOOR")
    return mu, sigma, alpha


def _log_alpha(alpha: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(alpha)


def _moment_update(mu, sigma, weight, s1, s2, min_weight):
    """ML mean/sd from shifted moment sums; clusters below ``min_weight`` keep their parameters."""
    new_mu, new_sigma = mu.copy(), sigma.copy()
    flags = []
    for b in range(mu.size):
        if weight[b] <= min_weight:
            flags.append(f"empty_cluster_{b}")
            continue
        d = s1[b] / weight[b]
        var = max(0.0, s2[b] / weight[b] - d * d)
        new_mu[b] = mu[b] + d
        sd = math.sqrt(var)
        if sd < SIGMA_FLOOR:
            sd = SIGMA_FLOOR
            flags.append(f"sigma_floor_{b}")
        new_sigma[b] = sd
    return new_mu, new_sigma, flags


def _record(trace, it, mu, sigma, alpha, loss, w0, flags):
    trace.records.append(
        IterRecord(it, tuple(map(float, mu)), tuple(map(float, sigma)), tuple(map(float, alpha)), float(loss), float(w0), tuple(flags))
    )


def _relocate(x, mu, sigma, log_alpha, labels, b):
    """Move empty cluster ``b``'s mean onto the worst-modelled point.

    Only points that then prefer ``b`` change cluster, and each of them
    lowers its own loss, so the objective cannot increase.
    """
    z = (x - mu[labels]) / sigma[labels]
    cost = 0.5 * z * z + np.log(sigma[labels]) - log_alpha[labels]
    mu = mu.copy()
    mu[b] = x[int(np.argmax(cost))]
    return mu


def kmeans(data, cfg: FitConfig, weighted: bool = False, backend=None) -> FitTrace:
    """Hard-assignment alternation of WTA assignment and per-cluster ML fits.

    With ``weighted`` the assignment compares ``alpha_b P_b(x)`` and each
    iteration resets ``alpha`` to the cluster fractions. The initial state is
    recorded as given. From the second assignment on, a cluster that receives
    no points (and still has positive weight) is moved onto the worst-fit
    point before the iteration is recorded; its sigma is kept.
    """
    x = _points(data)
    n = x.size
    if n < cfg.k:
        raise ValueError(f"need at least k={cfg.k} points, got {n}")
    mu, sigma, alpha = initial_params(x, cfg)
    if not weighted:
        alpha = np.full(cfg.k, 1.0 / cfg.k)
    trace = FitTrace("kmeans_weighted" if weighted else "kmeans")
    prev_labels = None
    flags: list[str] = []
    for it in range(cfg.max_iters):
        la = _log_alpha(alpha) if weighted else np.zeros(cfg.k)
        labels, counts, s1, s2, ll = kernels.wta_pass(x, mu, sigma, la, backend=backend)
        for b in range(cfg.k if it > 0 else 0):
            if counts[b] == 0 and (not weighted or alpha[b] > 0):
                mu = _relocate(x, mu, sigma, la, labels, b)
                flags = [*flags, f"relocated_{b}"]
                labels, counts, s1, s2, ll = kernels.wta_pass(x, mu, sigma, la, backend=backend)
        loss = ll / n
        if weighted:
            nz = counts > 0
            loss += float(-np.sum(counts[nz] / n * np.log2(alpha[nz])))
        if trace.records and loss > trace.final.loss:
            # only reachable through rounding once the objective has flattened
            trace.status = "converged"
            break
        _record(trace, it, mu, sigma, alpha, loss, counts[0] / n, flags)
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            trace.status = "converged"
            break
        if len(trace.records) > 1 and trace.records[-2].loss - loss < cfg.loss_tol:
            trace.status = "converged"
            break
        mu, sigma, flags = _moment_update(mu, sigma, counts.astype(float), s1, s2, 0.0)
        if weighted:
            alpha = counts / n
        prev_labels = labels
    log.debug("%s: %s after %d records", trace.algorithm, trace.status, len(trace.records))
    return trace


def kmeans_unweighted(data, cfg: FitConfig, backend=None) -> FitTrace:
    return kmeans(data, cfg, weighted=False, backend=backend)


def kmeans_weighted(data, cfg: FitConfig, backend=None) -> FitTrace:
    return kmeans(data, cfg, weighted=True, backend=backend)


def em(data, cfg: FitConfig, weighted: bool = False, backend=None) -> FitTrace:
    """EM for a Gaussian mixture; mixing weights stay at ``1/k`` unless ``weighted``."""
    x = _points(data)
    n = x.size
    if n < cfg.k:
        raise ValueError(f"need at least k={cfg.k} points, got {n}")
    mu, sigma, alpha = initial_params(x, cfg)
    if not weighted:
        alpha = np.full(cfg.k, 1.0 / cfg.k)
    trace = FitTrace("em_weighted" if weighted else "em")
    flags: list[str] = []
    for it in range(cfg.max_iters):
        rsum, s1, s2, ll = kernels.soft_pass(x, mu, sigma, _log_alpha(alpha), backend=backend)
        loss = ll / n
        if trace.records and loss > trace.final.loss:
            trace.status = "converged"
            break
        _record(trace, it, mu, sigma, alpha, loss, rsum[0] / n, flags)
        if len(trace.records) > 1 and trace.records[-2].loss - loss < cfg.loss_tol:
            trace.status = "converged"
            break
        mu, sigma, flags = _moment_update(mu, sigma, rsum, s1, s2, COLLAPSE_MASS * n)
        if weighted:
            alpha = rsum / n
    return trace


def posterior_objective(x, mu, log_sigma, alpha=None, need_grad=True, backend=None):
    """Mean posterior loss (bits) and its gradient in ``(mu, log sigma)``."""
    k = mu.size
    la = np.full(k, -math.log(k)) if alpha is None else _log_alpha(np.asarray(alpha))
    total, rsum, gmu, gls = kernels.posterior_pass(
        x, mu, np.exp(log_sigma), la, need_grad=need_grad, backend=backend
    )
    n = x.size
    return total / n, np.concatenate([gmu, gls]) / n, rsum / n


def posterior_descent(data, cfg: FitConfig, backend=None) -> FitTrace:
    """Gradient descent on the empirical posterior loss with backtracking.

    Parameters are ``(mu_b, log sigma_b)``; mixing weights stay equal. Each
    iteration starts the line search at ``cfg.step0`` and halves until the
    Armijo condition holds; after ``cfg.max_shrinks`` failures the run stops
    with status ``"stalled"``.
    """
    x = _points(data)
    if x.size == 0:
        raise ValueError("empty dataset")
    mu, sigma, _ = initial_params(x, cfg)
    k = cfg.k
    alpha = np.full(k, 1.0 / k)
    theta = np.concatenate([mu, np.log(sigma)])
    log_floor = math.log(SIGMA_FLOOR)
    trace = FitTrace("posterior_descent")

    f, g, w = posterior_objective(x, theta[:k], theta[k:], backend=backend)
    for it in range(cfg.max_iters):
        _record(trace, it, theta[:k], np.exp(theta[k:]), alpha, f, w[0], ())
        if np.max(np.abs(g)) < cfg.grad_tol:
            trace.status = "converged"
            break
        gg = float(np.dot(g, g))
        t = cfg.step0
        for _ in range(cfg.max_shrinks + 1):
            cand = theta - t * g
            if np.all(cand[k:] >= log_floor):
                fc, _, _ = posterior_objective(x, cand[:k], cand[k:], need_grad=False, backend=backend)
                if fc <= f - cfg.armijo * t * gg:
                    break
            t *= cfg.shrink
        else:
            trace.status = "stalled"
            break
        theta = cand
        f, g, w = posterior_objective(x, theta[:k], theta[k:], backend=backend)
    return trace


def fit(algorithm: str, data, cfg: FitConfig, backend=None) -> FitTrace:
    """Dispatch by algorithm name (see ``ALGORITHMS``)."""
    if algorithm == "kmeans":
        return kmeans(data, cfg, False, backend)
    if algorithm == "kmeans_weighted":
        return kmeans(data, cfg, True, backend)
    if algorithm == "em":
        return em(data, cfg, False, backend)
    if algorithm == "em_weighted":
        return em(data, cfg, True, backend)
    if algorithm == "posterior_descent":
        return posterior_descent(data, cfg, backend)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")

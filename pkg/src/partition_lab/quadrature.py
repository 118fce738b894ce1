"""Deterministic 1-D quadrature against a known sampling density.

Integrals are composite Simpson sums on a uniform grid that is split at
every point where an integrand has a jump or kink (WTA decision
boundaries, crossings of ``|a - b|``). Each piece is smooth, so the rule
keeps its fourth-order convergence.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .density import LOG2E, Gaussian1D, MixtureDensity
from .partition import PartitionedDensity, Rule

DEFAULT_POINTS = 65537
SPAN_SIGMAS = 12.0
TRUNCATION_TOL = 1e-8
DEGENERATE_MASS = 1e-12
MIN_PIECE_POINTS = 1025


class GridTruncationError(ValueError):
    """The grid leaves more than ``TRUNCATION_TOL`` of a density's mass outside."""


@dataclass(frozen=True)
class QuadratureGrid:
    lo: float
    hi: float
    n_points: int = DEFAULT_POINTS

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ValueError(f"n_points must be odd and >= 3, got {self.n_points}")

    def refined(self) -> "QuadratureGrid":
        """Same span with the spacing halved."""
        return QuadratureGrid(self.lo, self.hi, 2 * self.n_points - 1)

    def uniform_nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)

    def rule(self, breaks: Sequence[float] = ()) -> "PiecewiseRule":
        return PiecewiseRule.build(self, breaks)


def _components(d) -> list[Gaussian1D]:
    if isinstance(d, Gaussian1D):
        return [d]
    if isinstance(d, MixtureDensity):
        return [g for w, g in zip(d.weights, d.components) if w > 0]
    if isinstance(d, PartitionedDensity):
        return list(d.components)
    raise TypeError(f"not a density: {type(d).__name__}")


def default_grid(*densities, n_points: int = DEFAULT_POINTS) -> QuadratureGrid:
    """Span ``[min mu - 12 max sigma, max mu + 12 max sigma]`` over all components."""
    comps = [g for d in densities for g in _components(d)]
    smax = max(g.sigma for g in comps)
    lo = min(g.mu for g in comps) - SPAN_SIGMAS * smax
    hi = max(g.mu for g in comps) + SPAN_SIGMAS * smax
    return QuadratureGrid(lo, hi, n_points)


def narrow_breaks(grid: QuadratureGrid, *densities, min_nodes_per_sigma: float = 64.0) -> list[float]:
    """``mu +/- 12 sigma`` for components the uniform spacing cannot resolve.

    Each such window becomes its own Simpson piece with at least
    ``MIN_PIECE_POINTS`` nodes.
    """
    h = (grid.hi - grid.lo) / (grid.n_points - 1)
    out = []
    for d in densities:
        for g in _components(d):
            if g.sigma < min_nodes_per_sigma * h:
                out += [g.mu - SPAN_SIGMAS * g.sigma, g.mu + SPAN_SIGMAS * g.sigma]
    return out


def tail_mass(d, grid: QuadratureGrid) -> float:
    """Probability mass of ``d`` outside ``[grid.lo, grid.hi]``."""
    if isinstance(d, Gaussian1D):
        d = MixtureDensity.single(d)
    total = 0.0
    for w, g in zip(d.weights, d.components):
        total += w * (ndtr((grid.lo - g.mu) / g.sigma) + ndtr((g.mu - grid.hi) / g.sigma))
    return float(total)


def check_coverage(grid: QuadratureGrid, *densities) -> None:
    for d in densities:
        m = tail_mass(d, grid)
        if m > TRUNCATION_TOL:
            raise GridTruncationError(
                f"grid truncation: [{grid.lo}, {grid.hi}] leaves mass {m:.3g} outside"
            )


@dataclass(frozen=True, eq=False)
class PiecewiseRule:
    """Simpson nodes and weights over ``[lo, hi]`` split at ``breaks``."""

    nodes: np.ndarray
    weights: np.ndarray
    piece: np.ndarray  # piece index of each node
    edges: np.ndarray  # piece boundaries, len = n_pieces + 1

    @classmethod
    def build(cls, grid: QuadratureGrid, breaks: Sequence[float] = ()) -> "PiecewiseRule":
        inner = sorted({float(b) for b in breaks if grid.lo < b < grid.hi})
        edges = np.array([grid.lo, *inner, grid.hi])
        total = grid.hi - grid.lo
        nodes, weights, piece = [], [], []
        for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
            n = int(math.ceil((grid.n_points - 1) * (b - a) / total))
            n = max(n + (n % 2), MIN_PIECE_POINTS - 1)  # intervals, even
            x = np.linspace(a, b, n + 1)
            h = (b - a) / n
            w = np.ones(n + 1)
            w[1:-1:2] = 4.0
            w[2:-1:2] = 2.0
            nodes.append(x)
            weights.append(w * h / 3.0)
            piece.append(np.full(n + 1, i))
        return cls(np.concatenate(nodes), np.concatenate(weights), np.concatenate(piece), edges)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def wta_boundaries(pd: PartitionedDensity) -> list[float]:
    """Every point where two components' (weighted) log densities are equal.

    WTA labels can only change at these points, so between consecutive
    boundaries the assignment is constant.
    """
    use_alpha = pd.rule is Rule.WEIGHTED_WTA
    la = np.log(np.maximum(np.asarray(pd.alphas), 1e-300)) if use_alpha else np.zeros(pd.k)
    live = [b for b in range(pd.k) if not use_alpha or pd.alphas[b] > 0]
    roots = []
    for i, b in enumerate(live):
        for c in live[i + 1:]:
            gb, gc = pd.components[b], pd.components[c]
            vb, vc = gb.sigma**2, gc.sigma**2
            qa = 0.5 / vc - 0.5 / vb
            qb = gb.mu / vb - gc.mu / vc
            qc = (la[b] - math.log(gb.sigma) - 0.5 * gb.mu**2 / vb) - (
                la[c] - math.log(gc.sigma) - 0.5 * gc.mu**2 / vc
            )
            roots.extend(_quadratic_roots(qa, qb, qc))
    return sorted(roots)


def _quadratic_roots(a: float, b: float, c: float) -> list[float]:
    scale = max(abs(a), abs(b), abs(c))
    if scale == 0.0:
        return []
    if abs(a) <= 1e-14 * scale:
        return [] if b == 0 else [-c / b]
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    out = [q / a]
    if q != 0:
        out.append(c / q)
    return out


def crossing_points(f: Callable, grid: QuadratureGrid, breaks: Sequence[float] = ()) -> list[float]:
    """Roots of ``f`` located from sign changes on the grid and polished by Brent."""
    rule = grid.rule(breaks)
    x = rule.nodes
    y = f(x)
    out = []
    idx = np.nonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)[0]
    for i in idx:
        if x[i + 1] > x[i]:
            out.append(brentq(f, x[i], x[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    return out


def _as_density(d):
    if isinstance(d, Gaussian1D):
        return MixtureDensity.single(d)
    return d


@dataclass
class DecompositionReport:
    """Every term of the expected partition-loss decomposition, in bits."""

    rule: str
    w: list[float]
    kl: list[float]
    h_q_given_f: float
    h_q: float
    h2_w0: float
    h_f_given_x: float
    expected_partition_loss: float
    cross_entropy_weights: float
    degenerate: list[bool] = field(default_factory=list)

    @property
    def kl_sum(self) -> float:
        """``sum_b w_b KL(Q_b || P_b)``."""
        return float(sum(wb * kb for wb, kb in zip(self.w, self.kl)))

    @property
    def partition_information(self) -> float:
        return self.h2_w0 - self.h_f_given_x

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kl_sum"] = self.kl_sum
        return d


def _log2_assignment(pd: PartitionedDensity, rule: PiecewiseRule):
    """``Pr[F(x)=b]`` and its log2 at the rule's nodes, shape ``(K, N)``."""
    x = rule.nodes
    if pd.rule is Rule.POSTERIOR:
        lp = pd.log2_components(x) + pd.log2_alphas[:, None]
        m = lp.max(axis=0)
        lse = m + np.log2(np.exp2(lp - m).sum(axis=0))
        log_pi = lp - lse
        return np.exp2(log_pi), log_pi
    seg_labels = pd.hard_labels(rule.midpoints)
    labels = seg_labels[rule.piece]
    pi = (labels[None, :] == np.arange(pd.k)[:, None]).astype(float)
    # log2 pi only ever multiplies pi, so 0 where pi == 0 is harmless
    return pi, np.zeros_like(pi)


def _rule_for(q: MixtureDensity, pd: PartitionedDensity, grid: QuadratureGrid) -> PiecewiseRule:
    breaks = wta_boundaries(pd) if pd.rule.deterministic else []
    return grid.rule(breaks + narrow_breaks(grid, q))


def _entropy_bits(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0  # no -0.0


def decompose(q, pd: PartitionedDensity, grid: QuadratureGrid | None = None) -> DecompositionReport:
    """Quadrature values of every term in the expected partition-loss decomposition.

    ``Q_b`` is never materialized; integrands are restricted through
    ``Pr[F(x) = b]`` instead, so tiny cluster masses cause no division
    trouble. A cluster with mass below 1e-12 reports ``kl = 0`` and is
    flagged degenerate.
    """
    q = _as_density(q)
    grid = grid or default_grid(q)
    check_coverage(grid, q)
    rule = _rule_for(q, pd, grid)
    x = rule.nodes
    qx = q.pdf(x)
    with np.errstate(divide="ignore"):
        log_q = np.where(qx > 0, q.log2_pdf(x), 0.0)
    pi, log_pi = _log2_assignment(pd, rule)
    lp = pd.log2_components(x)

    qpi = qx[None, :] * pi
    w = np.array([rule.integrate(row) for row in qpi])
    w_tot = w.sum()

    expected = sum(rule.integrate(qpi[b] * -lp[b]) for b in range(pd.k))
    h_q = -rule.integrate(qx * log_q)
    h_f_given_x = -rule.integrate(qx * np.sum(pi * log_pi, axis=0))

    kl, degenerate = [], []
    h_q_given_f = 0.0
    for b in range(pd.k):
        if w[b] < DEGENERATE_MASS:
            kl.append(0.0)
            degenerate.append(True)
            continue
        lw = math.log2(w[b])
        # log2 Q_b = log2 Q + log2 Pr[F=b] - log2 w_b on the support of Q_b
        log_qb = log_q + log_pi[b] - lw
        h_q_given_f -= rule.integrate(qpi[b] * log_qb)
        kl.append(rule.integrate(qpi[b] * (log_qb - lp[b])) / w[b])
        degenerate.append(False)

    live = w > 0
    with np.errstate(divide="ignore"):
        la = np.log2(np.asarray(pd.alphas)[live])
    ce = float(-np.sum(w[live] * la))

    return DecompositionReport(
        rule=pd.rule.value,
        w=[float(v / w_tot) for v in w],
        kl=[float(v) for v in kl],
        h_q_given_f=float(h_q_given_f),
        h_q=float(h_q),
        h2_w0=_entropy_bits(w / w_tot),
        h_f_given_x=float(h_f_given_x),
        expected_partition_loss=float(expected),
        cross_entropy_weights=ce,
        degenerate=degenerate,
    )


def expected_partition_loss_pointwise(q, pd: PartitionedDensity, grid: QuadratureGrid | None = None) -> float:
    """``E_Q[chi(x)]`` by integrating ``partition_loss_point`` directly."""
    from .partition import partition_loss_point

    q = _as_density(q)
    grid = grid or default_grid(q)
    check_coverage(grid, q)
    rule = _rule_for(q, pd, grid)
    if pd.rule.deterministic:
        # evaluate each piece with its interior label, not the boundary tie-break
        total = 0.0
        for i, mid in enumerate(rule.midpoints):
            b = int(pd.hard_labels(mid))
            sel = rule.piece == i
            sub = PartitionedDensity((pd.components[b],), (1.0,), Rule.WTA)
            vals = q.pdf(rule.nodes[sel]) * partition_loss_point(sub, rule.nodes[sel])
            total += float(np.dot(rule.weights[sel], vals))
        return total
    return rule.integrate(q.pdf(rule.nodes) * partition_loss_point(pd, rule.nodes))


@dataclass
class WeightedLossIdentity:
    expected_weighted_loss: float
    rhs: float
    reduced: float
    cross_entropy_weights: float
    report: DecompositionReport

    def to_dict(self) -> dict:
        d = asdict(self)
        d["report"] = self.report.to_dict()
        return d


def weighted_loss_identity(q, pd: PartitionedDensity, grid: QuadratureGrid | None = None) -> WeightedLossIdentity:
    """Expected weighted K-means loss, directly and through the decomposition.

    ``rhs = sum w_b KL_b + H(Q) - H(w) - sum w_b log2 alpha_b``; with
    ``alpha = w`` the last two terms cancel, leaving ``reduced``.
    """
    if pd.rule is not Rule.WEIGHTED_WTA:
        raise ValueError("weighted_loss_identity needs the weighted WTA rule")
    q = _as_density(q)
    grid = grid or default_grid(q)
    check_coverage(grid, q)
    rule = _rule_for(q, pd, grid)
    x = rule.nodes
    qx = q.pdf(x)
    pi, _ = _log2_assignment(pd, rule)
    lp = pd.log2_components(x)
    with np.errstate(divide="ignore"):
        la = np.log2(np.asarray(pd.alphas))
    direct = 0.0
    for b in range(pd.k):
        if np.any(pi[b] > 0):
            direct += rule.integrate(qx * pi[b] * (-la[b] - lp[b]))
    rep = decompose(q, pd, grid)
    rhs = rep.kl_sum + rep.h_q - rep.h2_w0 + rep.cross_entropy_weights
    return WeightedLossIdentity(direct, rhs, rep.kl_sum + rep.h_q, rep.cross_entropy_weights, rep)


def _pair_grid(a, b, grid):
    if grid is None:
        grid = default_grid(a, b)
    check_coverage(grid, a, b)
    return grid


def kl_divergence(a, b, grid: QuadratureGrid | None = None) -> float:
    """``KL(a || b)`` in bits."""
    a, b = _as_density(a), _as_density(b)
    grid = _pair_grid(a, b, grid)
    rule = grid.rule(narrow_breaks(grid, a, b))
    x = rule.nodes
    ax = a.pdf(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(ax > 0, ax * (a.log2_pdf(x) - b.log2_pdf(x)), 0.0)
    return rule.integrate(integrand)


def entropy(a, grid: QuadratureGrid | None = None) -> float:
    """Differential entropy in bits; may be negative."""
    a = _as_density(a)
    grid = grid or default_grid(a)
    check_coverage(grid, a)
    rule = grid.rule(narrow_breaks(grid, a))
    ax = a.pdf(rule.nodes)
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(ax > 0, ax * a.log2_pdf(rule.nodes), 0.0)
    return -rule.integrate(integrand)


def variation_distance(a, b, grid: QuadratureGrid | None = None) -> float:
    """``integral |a - b|``, in ``[0, 2]``."""
    a, b = _as_density(a), _as_density(b)
    grid = _pair_grid(a, b, grid)
    f = lambda x: a.pdf(x) - b.pdf(x)  # noqa: E731
    narrow = narrow_breaks(grid, a, b)
    rule = grid.rule(narrow + crossing_points(f, grid, narrow))
    return rule.integrate(np.abs(f(rule.nodes)))


def _h2(p: float) -> float:
    return _entropy_bits([p, 1.0 - p])


@dataclass
class VdBoundCheck:
    lhs: float
    bound38: float
    bound40: float
    v_q0_q1: float
    v_qp: list[float]
    w0: float
    kl: list[float]
    swapped: bool
    satisfied38: bool
    satisfied40: bool
    slack: float = 1e-6

    @property
    def satisfied(self) -> bool:
        return self.satisfied38 and self.satisfied40

    def to_dict(self) -> dict:
        d = asdict(self)
        d["satisfied"] = self.satisfied
        return d


def check_vd_bounds(q, pd: PartitionedDensity, grid: QuadratureGrid | None = None, slack: float = 1e-6) -> VdBoundCheck:
    """Lower bounds on ``V(P0, P1)`` implied by a deterministic two-way partition.

    Clusters are relabelled so that ``w0 <= 1/2`` first.
    """
    if not pd.rule.deterministic:
        raise ValueError("variation-distance bounds need a deterministic partition")
    if pd.k != 2:
        raise ValueError("variation-distance bounds are for two clusters")
    q = _as_density(q)
    grid = grid or default_grid(q)
    rep = decompose(q, pd, grid)
    swapped = rep.w[0] > 0.5
    if swapped:
        pd = PartitionedDensity(pd.components[::-1], pd.alphas[::-1], pd.rule)
        rep = decompose(q, pd, grid)
    w0, w1 = rep.w

    vgrid = default_grid(q, *pd.components, n_points=grid.n_points)
    vgrid = QuadratureGrid(min(vgrid.lo, grid.lo), max(vgrid.hi, grid.hi), grid.n_points)
    lhs = variation_distance(pd.components[0], pd.components[1], vgrid)

    bounds = wta_boundaries(pd) + narrow_breaks(vgrid, q, *pd.components)
    seg = vgrid.rule(bounds)
    labels = pd.hard_labels(seg.midpoints)

    v_qp = []
    for b in range(2):
        if rep.degenerate[b]:
            v_qp.append(float("nan"))
            continue
        pb = pd.components[b]
        inside = lambda x, b=b, pb=pb: q.pdf(x) / rep.w[b] - pb.pdf(x)  # noqa: E731
        roots = crossing_points(inside, vgrid, bounds)
        rule = vgrid.rule(bounds + roots)
        x = rule.nodes
        in_b = labels_for(rule, pd) == b
        vals = np.where(in_b, np.abs(inside(x)), pb.pdf(x))
        v_qp.append(rule.integrate(vals))

    if any(rep.degenerate):
        v_q = float("nan")
    else:
        lab_nodes = labels[seg.piece]
        qx = q.pdf(seg.nodes)
        q0 = np.where(lab_nodes == 0, qx / w0, 0.0)
        q1 = np.where(lab_nodes == 1, qx / w1, 0.0)
        v_q = seg.integrate(np.abs(q0 - q1))

    wv = sum(wb * vb for wb, vb in zip((w0, w1), v_qp) if wb >= DEGENERATE_MASS)
    wkl = rep.kl_sum
    bound38 = 2.0 - 2.0 * wv - 2.0 * (1.0 - 2.0 * w0)
    bound40 = 1.5 - 2.0 * wkl - 2.0 * (1.0 - 2.0 * w0)
    return VdBoundCheck(
        lhs=lhs,
        bound38=bound38,
        bound40=bound40,
        v_q0_q1=v_q,
        v_qp=v_qp,
        w0=w0,
        kl=list(rep.kl),
        swapped=swapped,
        satisfied38=bool(lhs >= bound38 - slack),
        satisfied40=bool(lhs >= bound40 - slack),
        slack=slack,
    )


def labels_for(rule: PiecewiseRule, pd: PartitionedDensity) -> np.ndarray:
    """Hard label of every node, taken from its piece's interior."""
    return pd.hard_labels(rule.midpoints)[rule.piece]


# scalar per-point derivatives


def mixture_loss_point(p0: float, p1: float) -> float:
    """``-log2((p0 + p1) / 2)``."""
    return -math.log2(0.5 * (p0 + p1))


def posterior_loss_point(p0: float, p1: float) -> float:
    r0 = p0 / (p0 + p1)
    return -r0 * math.log2(p0) - (1.0 - r0) * math.log2(p1)


def mixture_loss_derivative(p0: float, p1: float) -> float:
    """Derivative of the equal-weight mixture log loss in ``p0``."""
    if p0 <= 0 or p1 <= 0:
        raise ValueError("density values must be positive")
    return -LOG2E / (p0 + p1)


def posterior_loss_derivative(p0: float, p1: float) -> float:
    """Derivative of the posterior loss at a point in ``p0``."""
    if p0 <= 0 or p1 <= 0:
        raise ValueError("density values must be positive")
    s = p0 + p1
    r0, r1 = p0 / s, p1 / s
    l0, l1 = math.log2(p0), math.log2(p1)
    return (-l0 + r0 * l0 + r1 * l1 - LOG2E) / s


def repulsion_sign(r0: float) -> float:
    """Bracketed factor of the posterior-loss derivative as a function of ``R0``.

    Positive values mean increasing ``P0(x)`` increases the loss.
    """
    if not 0.0 < r0 < 1.0:
        raise ValueError(f"r0 must lie in (0, 1), got {r0}")
    return (1.0 - r0) * math.log2((1.0 - r0) / r0) - LOG2E


def repulsion_root(tol: float = 1e-10) -> float:
    """Zero of ``repulsion_sign`` on ``(0, 1/2)`` by bisection."""
    lo, hi = 1e-12, 0.5
    if not (repulsion_sign(lo) > 0 > repulsion_sign(hi)):
        raise RuntimeError("repulsion_sign does not change sign on (0, 1/2)")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if repulsion_sign(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def binary_entropy(p: float) -> float:
    return _h2(p)

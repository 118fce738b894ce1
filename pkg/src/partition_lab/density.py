"""One-dimensional Gaussian densities, mixtures, sampling and ML estimation.

All log values are base 2 (bits).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SIGMA_FLOOR = 1e-6
LOG2E = 1.0 / math.log(2.0)
HALF_LOG2_2PI = 0.5 * math.log2(2.0 * math.pi)
_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class EmptyAssignmentError(ValueError):
    """Raised when a maximum-likelihood fit is requested on no points."""


@dataclass(frozen=True)
class Gaussian1D:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValueError(f"non-finite Gaussian parameters ({self.mu}, {self.sigma})")
        if self.sigma < SIGMA_FLOOR:
            raise ValueError(f"sigma={self.sigma} below SIGMA_FLOOR={SIGMA_FLOOR}")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", float(self.sigma))

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))

    def log2_pdf(self, x):
        return log_density(self, x)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma}


def log_density(g: Gaussian1D, x):
    """log2 of the Gaussian density at ``x`` (scalar or array)."""
    z = (np.asarray(x, dtype=float) - g.mu) / g.sigma
    out = (-0.5 * z * z - math.log(g.sigma) - _LN_SQRT_2PI) * LOG2E
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class MixtureDensity:
    """Weighted list of Gaussian components.

    Used both as a sampling density and as EM's hypothesis.
    """

    weights: tuple[float, ...]
    components: tuple[Gaussian1D, ...]

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        c = tuple(self.components)
        if not c:
            raise ValueError("mixture needs at least one component")
        if len(w) != len(c):
            raise ValueError("weights and components differ in length")
        if any(v < 0 for v in w):
            raise ValueError(f"negative mixture weight in {w}")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {math.fsum(w)}, not 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", c)

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence[float]]) -> "MixtureDensity":
        """Build from ``(weight, mu, sigma)`` triples."""
        triples = list(triples)
        return cls(
            tuple(t[0] for t in triples),
            tuple(Gaussian1D(t[1], t[2]) for t in triples),
        )

    @classmethod
    def from_dicts(cls, items: Iterable[dict]) -> "MixtureDensity":
        return cls.from_triples((d["weight"], d["mu"], d["sigma"]) for d in items)

    @classmethod
    def single(cls, g: Gaussian1D) -> "MixtureDensity":
        return cls((1.0,), (g,))

    def __len__(self):
        return len(self.components)

    @property
    def mus(self) -> np.ndarray:
        return np.array([g.mu for g in self.components])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([g.sigma for g in self.components])

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for w, g in zip(self.weights, self.components):
            if w > 0:
                out = out + w * g.pdf(x)
        return out

    def log2_pdf(self, x):
        x = np.asarray(x, dtype=float)
        terms = [
            math.log2(w) + log_density(g, x)
            for w, g in zip(self.weights, self.components)
            if w > 0
        ]
        return _logsumexp2(np.stack(np.broadcast_arrays(*terms)), axis=0)

    def to_dicts(self) -> list[dict]:
        return [
            {"weight": w, "mu": g.mu, "sigma": g.sigma}
            for w, g in zip(self.weights, self.components)
        ]


def _logsumexp2(a: np.ndarray, axis: int = 0) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.log2(np.sum(np.exp2(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(s, axis=axis)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the only RNG the package uses."""
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray
    seed: int | None = None
    source: MixtureDensity | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float).ravel()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.source == other.source
            and np.array_equal(self.points, other.points)
        )

    def to_csv(self, path) -> None:
        """Write ``x`` column (17 significant digits) plus a ``.json`` sidecar."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write("x\n")
            for v in self.points:
                fh.write(f"{v:.17g}\n")
        meta = {
            "seed": self.seed,
            "n": len(self),
            "source": self.source.to_dicts() if self.source is not None else None,
        }
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["x"]:
                raise ValueError(f"{path}: expected header 'x'")
            pts = [float(row[0]) for row in reader if row]
        seed, source = None, None
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
            seed = meta.get("seed")
            if meta.get("source"):
                source = MixtureDensity.from_dicts(meta["source"])
        return cls(np.array(pts), seed=seed, source=source)


def sample(q: MixtureDensity, n: int, seed: int) -> Dataset:
    """Draw ``n`` i.i.d. points: pick a component by weight, then draw from it."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    labels = rng.choice(len(q), size=n, p=np.asarray(q.weights))
    pts = rng.normal(q.mus[labels], q.sigmas[labels])
    return Dataset(pts, seed=int(seed), source=q)


def mle_fit(points) -> Gaussian1D:
    """Gaussian maximum-likelihood estimate, sigma floored at SIGMA_FLOOR."""
    x = np.asarray(points, dtype=float).ravel()
    if x.size == 0:
        raise EmptyAssignmentError("empty assignment set")
    mu = float(np.mean(x))
    sd = float(np.sqrt(np.mean((x - mu) ** 2)))
    return Gaussian1D(mu, max(SIGMA_FLOOR, sd))


def mixture_log_loss(q_hat: MixtureDensity, data) -> float:
    """Mean of ``-log2`` mixture density over the data, in bits."""
    x = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    return float(-np.mean(q_hat.log2_pdf(x)))


def gaussian_entropy(g: Gaussian1D) -> float:
    """Closed-form differential entropy in bits."""
    return 0.5 * math.log2(2.0 * math.pi * math.e * g.sigma**2)

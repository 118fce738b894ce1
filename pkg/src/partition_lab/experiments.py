"""Scripted example runs, the overlap sweep, and the repulsion curve.

Every experiment writes under ``<out>/<experiment>/``: one directory per
fitted run holding ``trace.csv``, ``result.json`` and ``plot.svg``, plus
experiment-level tables. CSV is canonical; SVG is a convenience view.
"""
from __future__ import annotations

import json
import logging
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels, svgplot
from .density import Dataset, Gaussian1D, MixtureDensity, sample
from .fitters import FitConfig, FitTrace, fit
from .quadrature import (
    check_vd_bounds,
    decompose,
    kl_divergence,
    repulsion_root,
    repulsion_sign,
    variation_distance,
)

log = logging.getLogger(__name__)

N_SAMPLES = 10000
FIGURE7_D_GRID = tuple(float(v) for v in np.arange(0.5, 6.01, 0.5))
FIGURE7_ALGORITHMS = ("em", "kmeans", "posterior_descent", "kmeans_weighted")
FIGURE7_SEED_OFFSET = 100_000
FIGURE8_POINTS = 999


@dataclass(frozen=True)
class RunSetup:
    label: str
    algorithm: str
    config: FitConfig


@dataclass
class ExperimentConfig:
    name: str
    sampling_density: MixtureDensity
    runs: list[RunSetup]
    seed_index: int = 0
    n_samples: int = N_SAMPLES
    base_seed: int = 0
    sweep: list[float] | None = None

    def __post_init__(self):
        labels = [r.label for r in self.runs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate run labels in {self.name}: {labels}")
        if self.sweep is not None and len(self.sweep) == 0:
            raise ValueError("sweep grid must be nonempty")

    @property
    def seed(self) -> int:
        return self.base_seed + self.seed_index


@dataclass
class RunResult:
    label: str
    trace: FitTrace | None
    initial_report: dict | None = None
    terminal_report: dict | None = None
    vd_bounds: dict | None = None
    v_p0_p1: float | None = None
    mixture_kl: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        d = {
            "label": self.label,
            "error": self.error,
            "initial_decomposition": self.initial_report,
            "terminal_decomposition": self.terminal_report,
            "vd_bounds": self.vd_bounds,
            "v_p0_p1": self.v_p0_p1,
            "mixture_kl": self.mixture_kl,
        }
        if self.trace is not None:
            d.update(self.trace.status_dict())
        return d


@dataclass
class ExperimentResult:
    name: str
    seed: int
    n_samples: int
    runs: dict[str, RunResult] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.runs.values())

    def __getitem__(self, label: str) -> RunResult:
        return self.runs[label]


# ---- example definitions -------------------------------------------------

def _mix(*triples) -> MixtureDensity:
    return MixtureDensity.from_triples(triples)


def example_config(name: str, base_seed: int = 0, n_samples: int = N_SAMPLES) -> ExperimentConfig:
    name = name.upper()
    if name == "A":
        truth = [(-2.0, 1.5), (2.0, 1.5)]
        runs = [
            RunSetup("kmeans", "kmeans", FitConfig(init=truth)),
            RunSetup("em", "em", FitConfig(init=truth)),
            RunSetup("posterior_descent", "posterior_descent", FitConfig(init=truth, grad_tol=0.03)),
        ]
        q = _mix((0.5, -2.0, 1.5), (0.5, 2.0, 1.5))
        idx = 0
    elif name == "B":
        init = [(0.0, 1.0), (100.0, 1.0)]
        runs = [
            RunSetup("kmeans", "kmeans", FitConfig(init=init)),
            RunSetup("kmeans_weighted", "kmeans_weighted", FitConfig(init=init)),
        ]
        q = _mix((1.0, 0.0, 1.0))
        idx = 1
    elif name == "C":
        init1 = [(0.0, 1.0), (0.0, 5.0)]
        init2 = [(0.0, 1.0), (5.0, 0.1)]
        runs = [
            RunSetup("kmeans", "kmeans", FitConfig(init=init1)),
            RunSetup("kmeans_init2", "kmeans", FitConfig(init=init2)),
            RunSetup("kmeans_weighted", "kmeans_weighted", FitConfig(init=init1)),
        ]
        q = _mix((0.95, 0.0, 1.0), (0.05, 5.0, 0.1))
        idx = 2
    elif name == "D":
        init = [(-5.0, 1.0), (5.0, 1.0)]
        runs = [
            RunSetup("kmeans", "kmeans", FitConfig(init=init)),
            RunSetup("em", "em", FitConfig(init=init)),
            RunSetup("kmeans_weighted", "kmeans_weighted", FitConfig(init=init)),
            RunSetup("em_weighted", "em_weighted", FitConfig(init=init)),
        ]
        q = _mix((0.25, -10.0, 1.0), (0.5, 0.0, 1.0), (0.25, 10.0, 1.0))
        idx = 3
    else:
        raise ValueError(f"unknown example {name!r}; expected A, B, C or D")
    return ExperimentConfig(f"example_{name.lower()}", q, runs, idx, n_samples, base_seed)


def analyse(q: MixtureDensity, trace: FitTrace) -> dict:
    """Quadrature summaries of a trace's first and last states against ``q``."""
    pd0 = trace.partitioned_density(trace.records[0])
    pd1 = trace.partitioned_density()
    out = {
        "initial_report": decompose(q, pd0).to_dict(),
        "terminal_report": decompose(q, pd1).to_dict(),
        "vd_bounds": None,
        "v_p0_p1": None,
        "mixture_kl": None,
    }
    if pd1.k == 2:
        out["v_p0_p1"] = variation_distance(*pd1.components)
        if pd1.rule.deterministic:
            out["vd_bounds"] = check_vd_bounds(q, pd1).to_dict()
    if trace.algorithm.startswith("em"):
        out["mixture_kl"] = kl_divergence(q, trace.mixture())
    return out


def _run_one(q: MixtureDensity, data: Dataset, setup: RunSetup) -> RunResult:
    try:
        trace = fit(setup.algorithm, data, setup.config)
    except Exception as exc:  # recorded, not raised
        log.warning("%s failed: %s", setup.label, exc)
        return RunResult(setup.label, None, error=f"{type(exc).__name__}: {exc}")
    return RunResult(setup.label, trace, **analyse(q, trace))


def _write_run(dirpath: Path, res: RunResult, title: str) -> None:
    dirpath.mkdir(parents=True, exist_ok=True)
    if res.trace is not None:
        res.trace.to_csv(dirpath / "trace.csv")
        it = [r.iteration for r in res.trace.records]
        chart = svgplot.Chart(title, "iteration", "objective (bits)").add("loss", it, res.trace.losses)
        svgplot.write(chart, dirpath / "plot.svg")
    _write_json(dirpath / "result.json", res.to_dict())


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, allow_nan=True) + "\n")


def run_experiment(cfg: ExperimentConfig, out=None) -> ExperimentResult:
    data = sample(cfg.sampling_density, cfg.n_samples, cfg.seed)
    res = ExperimentResult(cfg.name, cfg.seed, cfg.n_samples)
    for setup in cfg.runs:
        log.info("%s/%s", cfg.name, setup.label)
        res.runs[setup.label] = _run_one(cfg.sampling_density, data, setup)
    if out is not None:
        base = Path(out) / cfg.name
        for label, r in res.runs.items():
            _write_run(base / label, r, f"{cfg.name} {label}")
        _write_json(base / "experiment.json", {
            "name": cfg.name,
            "seed": cfg.seed,
            "n_samples": cfg.n_samples,
            "sampling_density": cfg.sampling_density.to_dicts(),
            "runs": {s.label: {"algorithm": s.algorithm, "config": _cfg_dict(s.config)} for s in cfg.runs},
        })
    return res


def _cfg_dict(c: FitConfig) -> dict:
    d = dict(c.__dict__)
    if not isinstance(d["init"], str):
        d["init"] = [list(r) for r in d["init"]]
    return d


def run_example(name: str, out=None, base_seed: int = 0, n_samples: int = N_SAMPLES) -> ExperimentResult:
    return run_experiment(example_config(name, base_seed, n_samples), out)


# ---- figure 3 ------------------------------------------------------------

def run_figure3(out=None, base_seed: int = 0, n_samples: int = N_SAMPLES) -> dict:
    """Example B unweighted K-means with a quadrature decomposition per iteration."""
    cfg = example_config("B", base_seed, n_samples)
    setup = next(r for r in cfg.runs if r.label == "kmeans")
    data = sample(cfg.sampling_density, n_samples, cfg.seed)
    trace = fit(setup.algorithm, data, setup.config)
    rows = []
    for rec in trace.records:
        rep = decompose(cfg.sampling_density, trace.partitioned_density(rec))
        rows.append((rec.iteration, rec.loss, rep.kl_sum, rep.h2_w0, rep.w[0]))
    series = {
        "iter": [r[0] for r in rows],
        "loss": [r[1] for r in rows],
        "kl_sum": [r[2] for r in rows],
        "h2_w0": [r[3] for r in rows],
        "w0": [r[4] for r in rows],
        "status": trace.status,
        "seed": cfg.seed,
    }
    if out is not None:
        base = Path(out) / "figure3" / "kmeans"
        base.mkdir(parents=True, exist_ok=True)
        trace.to_csv(base / "trace.csv")
        lines = ["iter,loss,kl_sum,h2_w0,w0"]
        lines += [f"{i},{l:.17g},{k:.17g},{h:.17g},{w:.17g}" for i, l, k, h, w in rows]
        (base / "series.csv").write_text("\n".join(lines) + "\n")
        it = series["iter"]
        chart = svgplot.Chart("K-means on a single Gaussian", "iteration", "bits")
        chart.add("loss", it, series["loss"]).add("sum w KL", it, series["kl_sum"]).add("H2(w0)", it, series["h2_w0"])
        svgplot.write(chart, base / "plot.svg")
        _write_json(base / "result.json", {**trace.status_dict(), "series": series})
    return series


# ---- figure 7 ------------------------------------------------------------

def figure7_density(d: float) -> MixtureDensity:
    return _mix((0.5, 0.0, 1.0), (0.5, float(d), 1.0))


def figure7_init(x: np.ndarray) -> list[tuple[float, float]]:
    """Symmetric init: means at the data quartiles, unit sigma."""
    q1, q3 = np.quantile(x, [0.25, 0.75])
    return [(float(q1), 1.0), (float(q3), 1.0)]


def figure7_seed(d: float, base_seed: int = 0) -> int:
    """Seed for the dataset at separation ``d``; independent of the rest of the grid."""
    s = base_seed + FIGURE7_SEED_OFFSET + int(round(1000 * d))
    if s < 0:
        raise ValueError(f"separation {d} too negative for base seed {base_seed}")
    return s


def _figure7_cell(args) -> dict:
    d, algorithm, base_seed, n_samples = args
    seed = figure7_seed(d, base_seed)
    q = figure7_density(d)
    data = sample(q, n_samples, seed)
    cfg = FitConfig(init=figure7_init(data.points))
    cell = {"d": d, "algorithm": algorithm, "seed": seed, "init": [list(r) for r in cfg.init]}
    try:
        tr = fit(algorithm, data, cfg)
    except Exception as exc:
        cell["error"] = f"{type(exc).__name__}: {exc}"
        cell["v"] = float("nan")
        return cell
    f = tr.final
    cell.update(
        status=tr.status,
        iterations=len(tr.records),
        loss=f.loss,
        mus=list(f.mus),
        sigmas=list(f.sigmas),
        alphas=list(f.alphas),
        w0=f.w0,
        v=variation_distance(Gaussian1D(f.mus[0], f.sigmas[0]), Gaussian1D(f.mus[1], f.sigmas[1])),
        error=None,
    )
    return cell


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def run_figure7(d_grid=FIGURE7_D_GRID, out=None, base_seed: int = 0, n_samples: int = N_SAMPLES,
                algorithms=FIGURE7_ALGORITHMS, jobs: int = 1) -> dict:
    """Variation distance between fitted components against mean separation.

    One dataset per d (seeded from d itself); every algorithm starts from
    the same quartile-based symmetric init. Results do not depend on ``jobs``.
    """
    d_grid = [float(d) for d in d_grid]
    if not d_grid:
        raise ValueError("d grid must be nonempty")
    cells = [(d, a, base_seed, n_samples) for d in d_grid for a in algorithms]
    results = _map(_figure7_cell, cells, jobs)
    by = {(c["d"], c["algorithm"]): c for c in results}
    table = []
    for d in d_grid:
        row = {"d": d, "v_true": variation_distance(Gaussian1D(0.0, 1.0), Gaussian1D(d, 1.0))}
        for a in algorithms:
            row[f"v_{a}"] = by[(d, a)]["v"]
        table.append(row)
    meta = {
        "init": "means at data quartiles, sigma = 1, equal weights; same for every algorithm and d",
        "em_variant": "unweighted (equal mixing weights)",
        "seed_rule": f"base_seed + {FIGURE7_SEED_OFFSET} + round(1000 * d)",
        "base_seed": base_seed,
        "n_samples": n_samples,
    }
    if out is not None:
        base = Path(out) / "figure7"
        base.mkdir(parents=True, exist_ok=True)
        cols = ["d", "v_true"] + [f"v_{a}" for a in algorithms]
        lines = [",".join(cols)] + [",".join(f"{row[c]:.17g}" for c in cols) for row in table]
        (base / "sweep.csv").write_text("\n".join(lines) + "\n")
        chart = svgplot.Chart("Variation distance vs mean separation", "d", "V(P0, P1)")
        chart.add("true", d_grid, [r["v_true"] for r in table], color="#000000")
        for a in algorithms:
            chart.add(a, d_grid, [r[f"v_{a}"] for r in table], dashed=True)
        svgplot.write(chart, base / "plot.svg")
        _write_json(base / "result.json", {"meta": meta, "table": table})
        for a in algorithms:
            cells_a = [by[(d, a)] for d in d_grid]
            adir = base / a
            adir.mkdir(parents=True, exist_ok=True)
            lines = ["d,seed,status,loss,mu0,sigma0,mu1,sigma1,w0,v"]
            for c in cells_a:
                if c.get("error"):
                    lines.append(f"{c['d']:.17g},{c['seed']},error,nan,nan,nan,nan,nan,nan,nan")
                    continue
                lines.append(
                    f"{c['d']:.17g},{c['seed']},{c['status']},{c['loss']:.17g},"
                    f"{c['mus'][0]:.17g},{c['sigmas'][0]:.17g},{c['mus'][1]:.17g},{c['sigmas'][1]:.17g},"
                    f"{c['w0']:.17g},{c['v']:.17g}"
                )
            (adir / "trace.csv").write_text("\n".join(lines) + "\n")
            _write_json(adir / "result.json", {"meta": meta, "cells": cells_a})
            chart = svgplot.Chart(f"{a}: V(P0, P1)", "d", "V")
            chart.add("true", d_grid, [r["v_true"] for r in table], color="#000000")
            chart.add(a, d_grid, [c["v"] for c in cells_a])
            svgplot.write(chart, adir / "plot.svg")
    return {"meta": meta, "table": table, "cells": results}


# ---- figure 8 ------------------------------------------------------------

def run_figure8(out=None, n_points: int = FIGURE8_POINTS) -> dict:
    r = np.linspace(0.001, 0.999, n_points)
    y = np.array([repulsion_sign(float(v)) for v in r])
    root = repulsion_root()
    if out is not None:
        base = Path(out) / "figure8"
        base.mkdir(parents=True, exist_ok=True)
        lines = ["r0,value"] + [f"{a:.17g},{b:.17g}" for a, b in zip(r, y)]
        (base / "curve.csv").write_text("\n".join(lines) + "\n")
        chart = svgplot.Chart("Sign of the posterior-loss derivative", "r0", "value", hlines=[0.0],
                              markers=[(root, 0.0, f"root {root:.4f}")])
        chart.add("sign term", r, y)
        svgplot.write(chart, base / "plot.svg")
        _write_json(base / "result.json", {"root": root, "n_points": n_points})
    return {"r0": r, "value": y, "root": root}


# ---- dispatch ------------------------------------------------------------

EXPERIMENTS = ("example_a", "example_b", "example_c", "example_d", "figure3", "figure7", "figure8")


def run_named(name: str, out=None, base_seed: int = 0, n_samples: int = N_SAMPLES, jobs: int = 1) -> bool:
    """Run one experiment by name; True iff every cell completed."""
    if name.startswith("example_") and name in EXPERIMENTS:
        return run_example(name[-1], out, base_seed, n_samples).ok
    if name == "figure3":
        run_figure3(out, base_seed, n_samples)
        return True
    if name == "figure7":
        res = run_figure7(out=out, base_seed=base_seed, n_samples=n_samples, jobs=jobs)
        return all(not c.get("error") for c in res["cells"])
    if name == "figure8":
        run_figure8(out)
        return True
    raise KeyError(name)


def manifest(command: list[str], config: dict, seeds: dict) -> dict:
    import scipy

    from . import __version__

    return {
        "command": command,
        "config": config,
        "seeds": seeds,
        "versions": {
            "partition_lab": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "kernel_backend": kernels.BACKEND,
            "platform": platform.platform(),
        },
        "env": {k: v for k, v in os.environ.items() if k.startswith("PARTITION_LAB_")},
    }

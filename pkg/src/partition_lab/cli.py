"""``partition-lab`` command-line entry point.

Exit codes: 0 success/converged, 1 bad input (config, unknown experiment),
2 fitter stopped without converging, 3 quadrature grid truncation.
stdout carries JSON only for ``decompose``; logs go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from pathlib import Path

from . import experiments
from .density import Dataset, Gaussian1D, MixtureDensity, sample
from .fitters import ALGORITHMS, FitConfig, fit
from .partition import PartitionedDensity, Rule
from .quadrature import DEFAULT_POINTS, GridTruncationError, QuadratureGrid, decompose, default_grid

log = logging.getLogger("partition_lab")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_TRUNCATED = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---- config loading ------------------------------------------------------

def _line_of(text: str, key: str | None) -> int:
    if key:
        for i, line in enumerate(text.splitlines(), 1):
            if re.search(rf'"{re.escape(key)}"\s*:', line):
                return i
    return 1


class Config:
    """A parsed JSON config that remembers its source for line-numbered errors."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            self.text = self.path.read_text()
        except OSError as exc:
            raise ConfigError(f"{self.path}: cannot read config: {exc.strerror}") from None
        try:
            self.data = json.loads(self.text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{self.path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(self.data, dict):
            raise ConfigError(f"{self.path}:1: top level must be an object")

    def error(self, key: str | None, msg: str) -> ConfigError:
        return ConfigError(f"{self.path}:{_line_of(self.text, key)}: {msg}")

    def get(self, key, default=None):
        return self.data.get(key, default)

    def require(self, key):
        if key not in self.data:
            raise ConfigError(f"{self.path}:1: missing required key {key!r}")
        return self.data[key]


def parse_density(cfg: Config, key: str = "density") -> MixtureDensity:
    items = cfg.require(key)
    try:
        if not isinstance(items, list) or not items:
            raise ValueError("must be a nonempty list of {weight, mu, sigma}")
        return MixtureDensity.from_dicts(items)
    except (KeyError, TypeError, ValueError) as exc:
        raise cfg.error(key, f"bad {key!r}: {exc}") from None


def parse_partition(cfg: Config) -> PartitionedDensity:
    p = cfg.require("partition")
    try:
        comps = p["components"]
        gs = tuple(Gaussian1D(float(c["mu"]), float(c["sigma"])) for c in comps)
        if all("alpha" in c for c in comps):
            alphas = tuple(float(c["alpha"]) for c in comps)
        else:
            alphas = (1.0 / len(gs),) * len(gs)
        return PartitionedDensity(gs, alphas, Rule.parse(p.get("rule", "wta")))
    except (KeyError, TypeError, ValueError) as exc:
        raise cfg.error("partition", f"bad 'partition': {exc}") from None


def _fit_config(cfg: Config, seed: int) -> FitConfig:
    opts = dict(cfg.get("fit", {}) or {})
    init = cfg.get("init", "random")
    try:
        k = int(opts.pop("k", len(init) if isinstance(init, list) else 2))
        return FitConfig(k=k, init=init, seed=seed, **opts)
    except (TypeError, ValueError) as exc:
        key = "init" if "init" in str(exc) else "fit"
        raise cfg.error(key, f"bad fit settings: {exc}") from None


def _seed(args, cfg: Config) -> int:
    if args.seed is not None:
        return int(args.seed)
    return int(cfg.get("seed", 0))


def _out_dir(args, default_name: str) -> Path:
    base = args.out or os.environ.get("PARTITION_LAB_OUT") or "results"
    return Path(base) if args.out else Path(base) / default_name


def _write_manifest(out: Path, argv, config: dict, seeds: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    m = experiments.manifest(list(argv), config, seeds)
    (out / "manifest.json").write_text(json.dumps(m, indent=2) + "\n")


# ---- subcommands ---------------------------------------------------------

def cmd_fit(args, argv) -> int:
    cfg = Config(args.config)
    seed = _seed(args, cfg)
    algo = args.algo or cfg.get("algorithm")
    if algo not in ALGORITHMS:
        raise cfg.error("algorithm", f"algorithm must be one of {ALGORITHMS}, got {algo!r}")
    fc = _fit_config(cfg, seed)
    if cfg.get("data"):
        data_path = Path(cfg.get("data"))
        if not data_path.is_absolute():
            data_path = cfg.path.parent / data_path
        try:
            data = Dataset.from_csv(data_path)
        except (OSError, ValueError) as exc:
            raise cfg.error("data", f"cannot load data: {exc}") from None
        q = None
    else:
        q = parse_density(cfg)
        n = int(args.n_samples or cfg.get("n_samples", experiments.N_SAMPLES))
        data = sample(q, n, seed)

    out = _out_dir(args, cfg.get("name", cfg.path.stem))
    trace = fit(algo, data, fc)
    result = trace.status_dict()
    if q is not None:
        result.update({k: v for k, v in experiments.analyse(q, trace).items()})
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    (out / "result.json").write_text(json.dumps(result, indent=2) + "\n")
    _write_manifest(out, argv, cfg.data, {"seed": seed, "n_samples": len(data)})
    log.info("%s: %s after %d iterations, loss %.6f", algo, trace.status, len(trace.records), trace.final.loss)
    return EXIT_OK if trace.converged else EXIT_NOT_CONVERGED


def cmd_decompose(args, argv) -> int:
    cfg = Config(args.config)
    q = parse_density(cfg)
    pd = parse_partition(cfg)
    g = cfg.get("grid") or {}
    try:
        n_points = int(g.get("n_points", DEFAULT_POINTS))
        grid = QuadratureGrid(float(g["lo"]), float(g["hi"]), n_points) if "lo" in g else default_grid(q, n_points=n_points)
    except (KeyError, TypeError, ValueError) as exc:
        raise cfg.error("grid", f"bad 'grid': {exc}") from None
    rep = decompose(q, pd, grid).to_dict()
    text = json.dumps(rep, indent=2, sort_keys=True)
    print(text)
    out = _out_dir(args, cfg.get("name", cfg.path.stem))
    out.mkdir(parents=True, exist_ok=True)
    (out / "decomposition.json").write_text(text + "\n")
    _write_manifest(out, argv, cfg.data, {})
    return EXIT_OK


def cmd_experiment(args, argv) -> int:
    names = experiments.EXPERIMENTS if args.name == "all" else (args.name,)
    for n in names:
        if n not in experiments.EXPERIMENTS:
            log.error("unknown experiment %r; expected one of %s or 'all'", n, ", ".join(experiments.EXPERIMENTS))
            return EXIT_INPUT
    out = Path(args.out or os.environ.get("PARTITION_LAB_OUT") or "results")
    seed = args.seed if args.seed is not None else 0
    n_samples = args.n_samples or experiments.N_SAMPLES
    ok = True
    for n in names:
        log.info("experiment %s", n)
        ok &= experiments.run_named(n, out, seed, n_samples, args.jobs)
    _write_manifest(out, argv, {"experiments": list(names)}, {"base_seed": seed, "n_samples": n_samples})
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_sweep(args, argv) -> int:
    try:
        grid = [float(v) for v in args.d.split(",")] if args.d else list(experiments.FIGURE7_D_GRID)
    except ValueError:
        log.error("--d must be a comma-separated list of numbers")
        return EXIT_INPUT
    if not grid:
        return EXIT_INPUT
    algos = tuple(args.algo.split(",")) if args.algo else experiments.FIGURE7_ALGORITHMS
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad:
        log.error("unknown algorithm(s) %s", bad)
        return EXIT_INPUT
    out = Path(args.out or os.environ.get("PARTITION_LAB_OUT") or "results")
    seed = args.seed if args.seed is not None else 0
    n_samples = args.n_samples or experiments.N_SAMPLES
    res = experiments.run_figure7(grid, out, seed, n_samples, algos, args.jobs)
    _write_manifest(out, argv, {"d_grid": grid, "algorithms": list(algos)}, {"base_seed": seed, "n_samples": n_samples})
    return EXIT_OK if all(not c.get("error") for c in res["cells"]) else EXIT_NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="partition-lab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--n-samples", type=int, default=None)
        sp.add_argument("--out", default=None, help="output directory (default $PARTITION_LAB_OUT or results/)")

    sp = sub.add_parser("fit", help="fit one algorithm from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--algo", choices=ALGORITHMS, default=None)
    common(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("decompose", help="quadrature decomposition of a partitioned density")
    sp.add_argument("--config", required=True)
    common(sp)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("experiment", help=f"run one of: {', '.join(experiments.EXPERIMENTS)}, all")
    sp.add_argument("name")
    sp.add_argument("--jobs", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("sweep", help="variation distance against mean separation")
    sp.add_argument("--d", default=None, help="comma-separated separations")
    sp.add_argument("--algo", default=None, help="comma-separated algorithms")
    sp.add_argument("--jobs", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args, argv)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except GridTruncationError as exc:
        log.error("grid truncation: %s", exc)
        return EXIT_TRUNCATED


if __name__ == "__main__":
    sys.exit(main())

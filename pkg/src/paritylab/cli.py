"""Command-line entry point: ``paritylab <experiment> [options]``.

Every subcommand writes ``<name>.csv`` (plus any companion CSVs) and
``<name>_manifest.json`` into ``--out``. Settings resolve in the order
built-in defaults, ``--config`` file, then explicit flags.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from paritylab import dynamics, experiments as ex
from paritylab.trainer import TrainConfig, train

DEFAULTS: dict[str, dict] = {
    "train": dict(N=100, P=1, M=100, alpha=0.1, S=25_000, log_every=10),
    "sweep-pe": dict(N=100, P=10, M=100, alpha=0.1, S=25_000, log_every=50),
    "sweep-alpha": dict(N=30, P=1, M=50_000, S=20_000, log_every=50),
    "gaussianity": dict(N=10_000, P=1, M=1000, alpha=2.0, S=30_000, log_every=100),
    "pw-invariance": dict(N=10_000, P=1, M=1000, alpha=2.0, S=5_000, log_every=50),
    "theory-vs-empirical": dict(N=1000, P=1, M=100_000, S=1000),
    "generalization": dict(N=12, P=1, M=10, alpha=1.0, S=2000),
    "effective-lr": dict(N=10, P=10, M=1000, S=100_000, log_every=100),
    "bounds": dict(N=100),
    "gradcheck": dict(N=10),
}

FLAG_KEYS = {"n": "N", "alpha": "alpha", "pe": "p_e", "m": "M", "steps": "S", "p": "P"}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON or key = value file with TrainConfig fields")
    common.add_argument("--seed", type=int, help="master seed (non-negative)")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker processes for independent runs")
    common.add_argument("--n", type=int, help="input dimension N")
    common.add_argument("--alpha", type=float, help="learning rate")
    common.add_argument("--pe", type=float, help="input sparsity p_e")
    common.add_argument("--m", type=int, help="batch size M")
    common.add_argument("--steps", type=int, help="maximum steps S")
    common.add_argument("--p", type=int, help="number of parallel units P")
    common.add_argument("--replicas", type=int, default=1, help="independent replicas per grid point")

    p = argparse.ArgumentParser(prog="paritylab", description="Sparse parity learning with XOR product units.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train one layer and write its trace")
    s = sub.add_parser("sweep-pe", parents=[common], help="steps to convergence across p_e")
    s.add_argument("--grid", type=float, nargs="+", help="p_e values (default 0.3/N..15/N)")
    s = sub.add_parser("sweep-alpha", parents=[common], help="steps to convergence across alpha")
    s.add_argument("--grid", type=float, nargs="+", help="alpha values (default alpha2/10..4N)")
    s.add_argument("--refine", type=int, default=3, help="bisection runs at the limit")
    s = sub.add_parser("gaussianity", parents=[common], help="family Q-Q correlations during training")
    s.add_argument("--snapshots", type=int, default=10)
    s = sub.add_parser("pw-invariance", parents=[common], help="trajectories across oracle densities")
    s.add_argument("--grid", type=float, nargs="+", help="p_w values (default 0.25 0.5 0.75)")
    sub.add_parser("theory-vs-empirical", parents=[common], help="SGD next to the moment recurrence")
    s = sub.add_parser("generalization", parents=[common], help="product node vs MLP on the truth table")
    s.add_argument("--arch", type=int, nargs="*", default=[128, 128, 32], help="MLP hidden sizes")
    s.add_argument("--mlp-lr", type=float, default=0.02)
    s = sub.add_parser("effective-lr", parents=[common], help="steps versus alpha * p_e")
    s.add_argument("--grid", type=str, nargs="+", help="N:alpha:p_e:M tuples")
    s = sub.add_parser("bounds", parents=[common], help="print and write theoretical thresholds")
    s.add_argument("--sizes", type=int, nargs="+", default=[7, 10, 18, 42, 43, 100, 1000, 10_000])
    s = sub.add_parser("gradcheck", parents=[common], help="analytic gradients against FD and Monte Carlo")
    s.add_argument("--instances", type=int, default=100)
    s.add_argument("--reps", type=int, default=100_000)
    return p


def build_config(args: argparse.Namespace) -> TrainConfig:
    values = dict(DEFAULTS.get(args.command, {}))
    if args.config is not None:
        loaded = vars(TrainConfig.from_file(args.config))
        values.update({k: loaded[k] for k in _file_keys(args.config) if k in loaded})
    for flag, key in FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    if args.seed is not None:
        if args.seed < 0:
            raise SystemExit("--seed must be non-negative")
        values["seed"] = args.seed
    if args.command == "theory-vs-empirical" and "alpha" not in values:
        values["alpha"] = 0.9 * dynamics.alpha2(values["N"])
    if args.command == "generalization" and values.get("p_e") is None:
        values["p_e"] = 1.0 / values["N"]
    return TrainConfig(**values)


def _file_keys(path: Path) -> set[str]:
    text = Path(path).read_text()
    try:
        return set(json.loads(text))
    except json.JSONDecodeError:
        return {line.split("=", 1)[0].strip() for line in text.splitlines() if "=" in line and not line.strip().startswith("#")}


def _effective_grid(tokens: list[str] | None, N: int) -> tuple:
    if tokens:
        return tuple(tuple(float(x) for x in t.split(":")) for t in tokens)
    pairs = [(N, 1.0, 0.01, 1000), (N, 10.0, 0.001, 1000), (N, 0.5, 0.01, 1000), (N, 2.0, 0.01, 1000)]
    family = [(n, n / 10, 1.0 / n, 1000) for n in (10, 30, 100)]
    return tuple(pairs + family)


def run(args: argparse.Namespace) -> dict:
    """Execute one subcommand; returns the summary stored in the manifest."""
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    name = args.command.replace("-", "_")
    cfg = build_config(args)
    ecfg = ex.ExperimentConfig(name, cfg, replicas=args.replicas, out=out, threads=args.threads)
    t0 = time.perf_counter()
    summary: dict = {}
    if args.command == "train":
        tr = train(cfg)
        tr.to_csv(out / f"{name}.csv")
        summary = {"convergence_step": tr.convergence_step, "failed": tr.failed, "final_l1": float(tr.l1[-1])}
    elif args.command in ("sweep-pe", "sweep-alpha"):
        ecfg = replace(ecfg, grid=tuple(args.grid or ()))
        if args.command == "sweep-alpha":
            ecfg.params["refine"] = args.refine
            res = ex.sweep_alpha(ecfg)
        else:
            res = ex.sweep_pe(ecfg)
        res.to_csv(out / f"{name}.csv")
        res.traces_to_csv(out / f"{name}_traces.csv")
        summary = res.markers
    elif args.command == "gaussianity":
        ecfg.params["snapshots"] = args.snapshots
        rep = ex.run_gaussianity(ecfg)
        rep.to_csv(out / f"{name}.csv")
        summary = {"family_qq_min": rep.family_qq_min, "residual_max": rep.residual_max, "band": rep.band, "passed": rep.passed}
    elif args.command == "pw-invariance":
        rep = ex.run_pw_invariance(replace(ecfg, grid=tuple(args.grid or ())))
        rep.to_csv(out / f"{name}.csv")
        summary = {"max_deviation": rep.max_deviation, "band": rep.band, "passed": rep.passed}
    elif args.command == "theory-vs-empirical":
        rep = ex.run_theory_vs_empirical(ecfg)
        rep.to_csv(out / f"{name}.csv")
        summary = {"alpha": cfg.alpha, "max_mu_deviation": rep.max_mu_deviation}
    elif args.command == "generalization":
        ecfg.params.update(arch=tuple(args.arch), mlp_lr=args.mlp_lr)
        rep = ex.run_generalization(ecfg)
        rep.to_csv(out / f"{name}.csv")
        summary = {"node_coverage_at_full": rep.node_coverage_at_full, "mlp_val_at_coverage": rep.mlp_val_at_coverage}
    elif args.command == "effective-lr":
        ecfg = replace(ecfg, grid=_effective_grid(args.grid, cfg.N))
        rep = ex.run_effective_lr(ecfg)
        rep.to_csv(out / f"{name}.csv")
        summary = {"rows": rep.rows}
    elif args.command == "bounds":
        alpha = args.alpha if args.alpha is not None else 0.0
        dynamics.write_bounds_csv(args.sizes, alpha, out / f"{name}.csv")
        print(",".join(dynamics.BOUNDS_HEADER))
        for N in args.sizes:
            print(",".join(f"{v:.6g}" for v in dynamics.bounds(N, alpha).row()))
        summary = {"sizes": args.sizes, "alpha": alpha}
    elif args.command == "gradcheck":
        rep = ex.run_gradcheck(seed=cfg.seed, instances=args.instances, reps=args.reps)
        rep.to_csv(out / f"{name}.csv")
        summary = {"fd_max_rel": rep.fd_max_rel, "mc_max_z": rep.mc_max_z}
    wall = time.perf_counter() - t0
    ex.write_manifest(out / f"{name}_manifest.json", ecfg, wall, summary)
    return summary


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        summary = run(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if args.command != "bounds":
        print(json.dumps(ex.to_jsonable(summary), indent=2, default=str))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

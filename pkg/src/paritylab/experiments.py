"""Desk-scale experiment harness.

Each ``run_*``/``sweep_*`` function takes an :class:`ExperimentConfig`, runs
the training jobs it describes and returns a report object that can write its
raw rows and derived markers to disk. Independent runs may be spread over
worker processes; results are keyed by grid position so ordering never
affects the output.
"""

from __future__ import annotations

import csv
import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import scipy
from scipy import stats as sps

from paritylab import __version__, data, dynamics, stats, trainer
from paritylab.trainer import TrainConfig

LIMIT_REDUCTION = 0.1


@dataclass
class ExperimentConfig:
    name: str
    base: TrainConfig
    grid: tuple = ()
    replicas: int = 1
    out: Path | None = None
    threads: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        self.grid = tuple(self.grid)


def replica_seed(seed: int, r: int) -> int:
    """Independent master seed for replica ``r``; replica 0 keeps ``seed``."""
    if r == 0:
        return int(seed)
    return int(np.random.SeedSequence(seed, spawn_key=(r,)).generate_state(1, np.uint64)[0] >> 1)


def _run_one(cfg: TrainConfig) -> dict:
    tr = trainer.train(cfg)
    return {
        "steps": tr.convergence_step,
        "converged": tr.converged,
        "failed": tr.failed,
        "reduction": tr.distance_reduction,
        "trace": np.column_stack([tr.step, tr.l1]),
    }


def run_many(cfgs: list[TrainConfig], threads: int = 1, fn: Callable = _run_one) -> list:
    """Map ``fn`` over configs, optionally across processes; output order follows input."""
    if threads <= 1 or len(cfgs) <= 1:
        return [fn(c) for c in cfgs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, cfgs))


def fit_power_law(x: Iterable[float], y: Iterable[float]) -> tuple[float, float, float]:
    """Least-squares line through (log x, log y): (slope, intercept, slope standard error)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if lx.size < 2:
        raise ValueError("need at least two points")
    if lx.size == 2:
        slope = (ly[1] - ly[0]) / (lx[1] - lx[0])
        return float(slope), float(ly[0] - slope * lx[0]), float("nan")
    r = sps.linregress(lx, ly)
    return float(r.slope), float(r.intercept), float(r.stderr)


def refine_minimum(x: np.ndarray, y: np.ndarray) -> float:
    """Vertex of the parabola through the grid minimum and its neighbours in log-log space.

    Falls back to the grid point when the minimum sits on the edge of the
    finite values or the local fit is not convex.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    i = int(np.nanargmin(y))
    if i == 0 or i == x.size - 1 or not np.all(np.isfinite(y[i - 1 : i + 2])):
        return float(x[i])
    lx, ly = np.log(x[i - 1 : i + 2]), np.log(y[i - 1 : i + 2])
    a, b, _ = np.polyfit(lx, ly, 2)
    if a <= 0:
        return float(x[i])
    return float(np.exp(np.clip(-b / (2 * a), lx[0], lx[2])))


@dataclass
class SweepResult:
    axis: str
    N: int
    values: np.ndarray
    steps: np.ndarray
    converged: np.ndarray
    failed: np.ndarray
    reduction: np.ndarray
    markers: dict
    traces: list = field(default_factory=list)

    def mean_steps(self) -> np.ndarray:
        """Mean steps per grid value; NaN unless every replica converged."""
        out = np.full(self.values.size, np.nan)
        for j in range(self.values.size):
            if np.all(self.converged[j]):
                out[j] = self.steps[j].mean()
        return out

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([self.axis, "replica", "steps", "converged", "failed", "reduction"])
            for j, v in enumerate(self.values):
                for r in range(self.steps.shape[1]):
                    s = self.steps[j, r]
                    w.writerow([repr(float(v)), r, "" if np.isnan(s) else int(s), int(self.converged[j, r]), int(self.failed[j, r]), repr(float(self.reduction[j, r]))])

    def traces_to_csv(self, path: str | Path) -> None:
        """Raw (value, replica, step, distance) rows for iso-distance curves."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([self.axis, "replica", "step", "l1"])
            for (j, r), tr in self.traces:
                for k, l1 in tr:
                    w.writerow([repr(float(self.values[j])), r, int(k), repr(float(l1))])


def _sweep(cfg: ExperimentConfig, axis: str, make: Callable[[float, int], TrainConfig]) -> SweepResult:
    values = np.asarray(cfg.grid, dtype=float)
    if values.size == 0:
        raise ValueError("sweep grid is empty")
    jobs = [(j, r) for j in range(values.size) for r in range(cfg.replicas)]
    results = run_many([make(values[j], r) for j, r in jobs], cfg.threads)
    shape = (values.size, cfg.replicas)
    steps = np.full(shape, np.nan)
    conv, fail, red = np.zeros(shape, bool), np.zeros(shape, bool), np.zeros(shape)
    traces = []
    for (j, r), res in zip(jobs, results):
        if res["steps"] is not None:
            steps[j, r] = res["steps"]
        conv[j, r], fail[j, r], red[j, r] = res["converged"], res["failed"], res["reduction"]
        traces.append(((j, r), res["trace"]))
    return SweepResult(axis, cfg.base.N, values, steps, conv, fail, red, {}, traces)


def limit_failed(res: SweepResult) -> np.ndarray:
    """Grid values where any replica diverged or reduced its distance by < 10%."""
    bad = res.failed | (~res.converged & (res.reduction < LIMIT_REDUCTION))
    return bad.any(axis=1)


def _first_above_success(values: np.ndarray, bad: np.ndarray, good: np.ndarray) -> float | None:
    """Smallest bad value lying above some good value; a limit needs a bracket."""
    if not good.any():
        return None
    idx = np.flatnonzero(bad & (np.arange(values.size) > np.argmax(good)))
    return float(values[idx[0]]) if idx.size else None


def default_pe_grid(N: int, points: int = 14) -> np.ndarray:
    grid = np.geomspace(0.3, 15.0, points) / N
    # small N would push the top of the grid past 1
    return grid[grid <= 1.0]


def sweep_pe(cfg: ExperimentConfig) -> SweepResult:
    """Steps-to-convergence across a sparsity grid.

    Markers: ``p_e_star`` (refined argmin of mean steps), ``p_e_star_grid``
    and ``p_e_lim`` (smallest grid value with failure or < 10% reduction).
    Absent markers are ``None``.
    """
    if not cfg.grid:
        cfg = replace(cfg, grid=tuple(default_pe_grid(cfg.base.N)))
    res = _sweep(cfg, "p_e", lambda v, r: replace(cfg.base, p_e=float(v), seed=replica_seed(cfg.base.seed, r)))
    ms = res.mean_steps()
    ok = np.isfinite(ms)
    lim = limit_failed(res)
    res.markers = {
        "p_e_star": refine_minimum(res.values, ms) if ok.any() else None,
        "p_e_star_grid": float(res.values[np.nanargmin(ms)]) if ok.any() else None,
        "p_e_lim": _first_above_success(res.values, lim, ok),
    }
    return res


def default_alpha_grid(N: int, points: int = 12) -> np.ndarray:
    a2 = dynamics.alpha2(N)
    lo = a2 / 10 if a2 > 0 else 0.01 * N
    return np.geomspace(lo, 4.0 * N, points)


def _merge(a: SweepResult, b: SweepResult) -> SweepResult:
    order = np.argsort(np.concatenate([a.values, b.values]), kind="stable")
    cat = lambda x, y: np.concatenate([x, y])[order]
    shift = a.values.size
    traces = a.traces + [((j + shift, r), t) for (j, r), t in b.traces]
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    traces = [((int(inv[j]), r), t) for (j, r), t in traces]
    return SweepResult(
        a.axis, a.N, cat(a.values, b.values), cat(a.steps, b.steps), cat(a.converged, b.converged),
        cat(a.failed, b.failed), cat(a.reduction, b.reduction), {}, traces,
    )


def sweep_alpha(cfg: ExperimentConfig) -> SweepResult:
    """Steps-to-convergence across a learning-rate grid at p_e = 1/N.

    Markers: ``alpha_lim`` (smallest failing value, failure meaning no
    convergence within S), ``alpha_star`` (fastest converging value below it)
    and the theoretical thresholds ``alpha0``, ``alpha1``, ``alpha2``.
    ``params["refine"]`` adds that many log-space bisection runs between the
    last converging and the first failing grid value.
    """
    N = cfg.base.N
    if not cfg.grid:
        cfg = replace(cfg, grid=tuple(default_alpha_grid(N)))
    base = replace(cfg.base, p_e=1.0 / N)
    make = lambda v, r: replace(base, alpha=float(v), seed=replica_seed(base.seed, r))
    res = _sweep(cfg, "alpha", make)
    for _ in range(int(cfg.params.get("refine", 0))):
        bad = ~res.converged.all(axis=1)
        lim = _first_above_success(res.values, bad, ~bad)
        if lim is None:
            break
        i = int(np.flatnonzero(res.values == lim)[0])
        mid = float(np.sqrt(res.values[i - 1] * res.values[i]))
        res = _merge(res, _sweep(replace(cfg, grid=(mid,)), "alpha", make))
    bad = ~res.converged.all(axis=1)
    ms = res.mean_steps()
    lim = _first_above_success(res.values, bad, ~bad)
    below = np.where(res.values < lim, ms, np.nan) if lim is not None else ms
    res.markers = {
        "alpha_lim": lim,
        "alpha_star": float(res.values[np.nanargmin(below)]) if np.isfinite(below).any() else None,
        "alpha0": dynamics.alpha0(N) if N > 2 else None,
        "alpha1": dynamics.alpha1(N) if N > 2 else None,
        "alpha2": dynamics.alpha2(N) if N > 2 else None,
    }
    return res


# ---------------------------------------------------------------- gaussianity


@dataclass
class GaussianityReport:
    rows: list[dict]
    threshold: float
    band: float

    @property
    def family_qq_min(self) -> float:
        return min(min(r["qq0"], r["qq1"]) for r in self.rows)

    @property
    def residual_max(self) -> float:
        return max(r["residual"] for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.family_qq_min >= self.threshold and self.residual_max <= self.band

    def to_csv(self, path: str | Path) -> None:
        _write_dicts(path, self.rows)


def run_gaussianity(cfg: ExperimentConfig) -> GaussianityReport:
    """Single-unit run with family moments and Q-Q correlations at evenly spaced snapshots.

    ``params``: ``snapshots`` (default 10), ``threshold`` (default
    :data:`stats.GAUSSIAN_QQ_THRESHOLD`). Snapshots span step 0 to the
    convergence step (or S).
    """
    base = replace(cfg.base, P=1)
    n_snap = int(cfg.params.get("snapshots", 10))
    threshold = float(cfg.params.get("threshold", stats.GAUSSIAN_QQ_THRESHOLD))
    _, oracle = trainer.init_state(base)
    stride = max(1, base.S // (20 * n_snap))
    kept: dict[int, np.ndarray] = {}

    def keep(k, W, batch):
        if k % stride == 0:
            kept[k] = W[:, 0].copy()

    tr = trainer.train(base, callback=keep)
    last = tr.convergence_step or int(tr.step[-1])
    kept[last] = tr.W[:, 0].copy()
    ks = np.array(sorted(kept))
    targets = np.linspace(0, last, n_snap)
    chosen = sorted({int(ks[np.argmin(np.abs(ks - t))]) for t in targets})
    o = oracle[:, 0]
    rows = []
    for k in chosen:
        w = kept[k]
        fm = stats.family_moments(w[:, None], oracle)
        rows.append(
            {
                "step": k,
                "qq0": stats.qq_gaussian(w[o == 0]).correlation,
                "qq1": stats.qq_gaussian(w[o == 1]).correlation,
                "qq_all": stats.qq_gaussian(w).correlation,
                "mu0": fm.mu0,
                "sig0": fm.sig0_sq,
                "mu1": fm.mu1,
                "sig1": fm.sig1_sq,
                "residual": abs(fm.mu0 - (1 - fm.mu1)),
            }
        )
    band = 5.0 / np.sqrt(min(int((o == 0).sum()), int((o == 1).sum())))
    return GaussianityReport(rows, threshold, float(band))


# -------------------------------------------------------------- p_w invariance


@dataclass
class PwInvarianceReport:
    p_w: tuple
    steps: np.ndarray
    mu0: dict
    mu1: dict
    counts: dict
    max_deviation: float
    band: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.band

    def to_csv(self, path: str | Path) -> None:
        rows = []
        for i, k in enumerate(self.steps):
            row = {"step": int(k)}
            for p in self.p_w:
                row[f"mu0_pw{p}"] = self.mu0[p][i]
                row[f"mu1_pw{p}"] = self.mu1[p][i]
            rows.append(row)
        _write_dicts(path, rows)


def _trace_fn(cfg: TrainConfig) -> trainer.TrainTrace:
    return trainer.train(cfg)


def run_pw_invariance(cfg: ExperimentConfig) -> PwInvarianceReport:
    """Identical runs over oracle densities; compares family-mean trajectories.

    Grid values are the p_w levels (default 0.25, 0.5, 0.75). Family 1 is
    compared through ``1 - mu1``. The band is ``5/sqrt(n)`` for the smallest
    family present in any run.
    """
    levels = cfg.grid or (0.25, 0.5, 0.75)
    base = replace(cfg.base, log_every=cfg.base.log_every)
    traces = run_many([replace(base, p_w=float(p)) for p in levels], cfg.threads, _trace_fn)
    n = min(len(t.step) for t in traces)
    steps = traces[0].step[:n]
    mu0 = {p: t.mu0[:n] for p, t in zip(levels, traces)}
    mu1 = {p: t.mu1[:n] for p, t in zip(levels, traces)}
    counts = {}
    for p in levels:
        ones = int(np.floor(p * base.N + 0.5)) * base.P
        counts[p] = (base.N * base.P - ones, ones)
    curves = []
    for p in levels:
        curves.append(mu0[p])
        curves.append(1.0 - mu1[p])
    stack = np.vstack(curves)
    present = np.isfinite(stack).all(axis=1)
    stack = stack[present]
    dev = float(np.max(stack.max(axis=0) - stack.min(axis=0))) if stack.shape[0] > 1 else 0.0
    smallest = min(c for pair in counts.values() for c in pair if c > 0)
    return PwInvarianceReport(tuple(levels), steps, mu0, mu1, counts, dev, float(5.0 / np.sqrt(smallest)))


# -------------------------------------------------------- theory vs empirical


@dataclass
class TheoryReport:
    steps: np.ndarray
    mu0_emp: np.ndarray
    mu0_theory: np.ndarray
    mu1_emp: np.ndarray
    mu1_theory: np.ndarray
    sig0_emp: np.ndarray
    sig0_theory: np.ndarray

    @property
    def max_mu_deviation(self) -> float:
        d0 = np.abs(self.mu0_emp - self.mu0_theory)
        d1 = np.abs(self.mu1_emp - self.mu1_theory)
        return float(np.nanmax(np.concatenate([d0, d1])))

    def variance_ratio(self, window: slice = slice(1, 50)) -> float:
        """Median one-step ratio of empirical family-0 variances over ``window``."""
        s = self.sig0_emp[window]
        return float(np.median(s[1:] / s[:-1]))

    def to_csv(self, path: str | Path) -> None:
        rows = [
            {"step": int(k), "mu0_emp": a, "mu0_theory": b, "mu1_emp": c, "mu1_theory": d, "sig0_emp": e, "sig0_theory": f}
            for k, a, b, c, d, e, f in zip(self.steps, self.mu0_emp, self.mu0_theory, self.mu1_emp, self.mu1_theory, self.sig0_emp, self.sig0_theory)
        ]
        _write_dicts(path, rows)


def run_theory_vs_empirical(cfg: ExperimentConfig) -> TheoryReport:
    """SGD at p_e = 1/N next to the moment recurrence started from the same moments.

    The recurrence for family 0 starts from the empirical initial moments of
    family 0; family 1 is tracked through its mirror image ``1 - mu1``.
    ``base.S`` sets the horizon and training continues past convergence.
    """
    base = replace(cfg.base, p_e=1.0 / cfg.base.N, log_every=1)
    tr = trainer.train(base, run_to_end=True)
    N, steps = base.N, len(tr.step) - 1

    def theory(mu, s2):
        t = dynamics.iterate(dynamics.DistState(mu, s2, 0), base.alpha, N, steps)
        return t.mu, t.sigma_sq

    m0, s0 = theory(tr.mu0[0], tr.sig0[0])
    if np.isfinite(tr.mu1[0]):
        m1, _ = theory(1.0 - tr.mu1[0], tr.sig1[0])
        m1 = 1.0 - m1
    else:
        m1 = np.full_like(m0, np.nan)
    n = min(len(m0), len(tr.step))
    return TheoryReport(tr.step[:n], tr.mu0[:n], m0[:n], tr.mu1[:n], m1[:n], tr.sig0[:n], s0[:n])


# ------------------------------------------------------------- generalization


@dataclass
class GeneralizationReport:
    node_coverage_at_full: list
    node_steps_at_full: list
    mlp_val_at_coverage: list
    mlp_curves: list
    node_curves: list

    @property
    def node_max_coverage(self) -> float | None:
        vals = self.node_coverage_at_full
        return None if any(v is None for v in vals) else float(max(vals))

    @property
    def mlp_max_val(self) -> float | None:
        vals = [v for v in self.mlp_val_at_coverage if v is not None]
        return float(max(vals)) if vals else None

    def to_csv(self, path: str | Path) -> None:
        rows = []
        for r, curve in enumerate(self.node_curves):
            rows += [{"model": "product", "replica": r, "step": k, "coverage": c, "train_acc": "", "val_acc": v} for k, c, v in curve]
        for r, res in enumerate(self.mlp_curves):
            rows += [
                {"model": "mlp", "replica": r, "step": int(k), "coverage": c, "train_acc": t, "val_acc": v}
                for k, c, t, v in zip(res.step, res.coverage, res.train_acc, res.val_acc)
            ]
        _write_dicts(path, rows)


def product_node_generalization(cfg: TrainConfig, eval_every: int = 1) -> tuple[int | None, float | None, list]:
    """Train one unit, tracking truth-table coverage and validation accuracy.

    Returns the step and coverage at which validation first reaches 1.0
    (``None`` if never) plus the (step, coverage, val_acc) curve.
    """
    N = cfg.N
    if N > 24:
        raise ValueError("truth-table evaluation is limited to N <= 24")
    cfg = replace(cfg, P=1)
    _, oracle = trainer.init_state(cfg)
    seen = np.zeros(2**N, dtype=bool)
    curve: list = []
    hit: dict = {}

    def cb(k, W, batch):
        if batch is not None:
            seen[trainer.input_codes(batch)] = True
        if k % eval_every == 0:
            acc = trainer.truth_table_accuracy(W[:, 0], oracle[:, 0])
            curve.append((k, float(seen.mean()), acc))
            if acc == 1.0:
                hit["k"], hit["cov"] = k, float(seen.mean())
                return True
        return None

    trainer.train(cfg, callback=cb)
    return hit.get("k"), hit.get("cov"), curve


def run_generalization(cfg: ExperimentConfig) -> GeneralizationReport:
    """Product node and MLP on the same batch stream.

    Both models see identical batches, so their coverage curves coincide and
    the MLP is compared at the step where the node first reaches full
    validation accuracy. ``params``: ``arch`` (MLP hidden sizes, default
    (128, 128, 32)), ``mlp_lr`` (default 0.02), ``mlp_steps`` (fixed MLP
    horizon instead of the node's hit step), ``coverage_cap`` (comparison
    coverage when the node never reaches 1.0, default 0.05).
    """
    base = cfg.base
    if base.N > 24:
        raise ValueError("truth-table evaluation is limited to N <= 24")
    arch = tuple(cfg.params.get("arch", (128, 128, 32)))
    lr = float(cfg.params.get("mlp_lr", 0.02))
    fixed_steps = cfg.params.get("mlp_steps")
    cap = float(cfg.params.get("coverage_cap", 0.05))
    cov_full, steps_full, mlp_vals, mlp_curves, node_curves = [], [], [], [], []
    for r in range(cfg.replicas):
        c = replace(base, seed=replica_seed(base.seed, r), P=1)
        k, cov, curve = product_node_generalization(c)
        steps_full.append(k)
        cov_full.append(cov)
        node_curves.append(curve)
        horizon = int(fixed_steps) if fixed_steps is not None else (k if k else base.S)
        res = trainer.mlp_train(replace(c, S=max(1, horizon)), arch=arch, lr=lr, eval_every=max(1, horizon // 100))
        mlp_curves.append(res)
        mlp_vals.append(res.val_at_coverage(cov if cov is not None else cap))
    return GeneralizationReport(cov_full, steps_full, mlp_vals, mlp_curves, node_curves)


# --------------------------------------------------------- effective rate


@dataclass
class EffectiveLRReport:
    rows: list[dict]

    def steps_for(self, effective: float) -> list:
        return [r["steps"] for r in self.rows if np.isclose(r["alpha"] * r["p_e"], effective)]

    def spread(self, effective: float) -> float:
        """``max/min - 1`` of steps among runs sharing ``alpha * p_e``; inf if any failed."""
        s = self.steps_for(effective)
        if not s or any(v is None for v in s):
            return float("inf")
        return float(max(s) / min(s) - 1.0)

    def to_csv(self, path: str | Path) -> None:
        _write_dicts(path, self.rows)


def run_effective_lr(cfg: ExperimentConfig) -> EffectiveLRReport:
    """Steps-to-convergence over a grid of (N, alpha, p_e, M) tuples.

    Grid entries are 4-tuples; ``base`` supplies everything else.
    """
    if not cfg.grid:
        raise ValueError("effective-rate grid is empty")
    cfgs = [replace(cfg.base, N=int(N), alpha=float(a), p_e=float(p), M=int(M)) for N, a, p, M in cfg.grid]
    results = run_many(cfgs, cfg.threads)
    rows = []
    for (N, a, p, M), res in zip(cfg.grid, results):
        rows.append({"N": int(N), "alpha": float(a), "p_e": float(p), "M": int(M), "alpha_pe": float(a) * float(p), "steps": res["steps"], "failed": res["failed"]})
    return EffectiveLRReport(rows)


# ------------------------------------------------------------------- output


def _write_dicts(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})


def to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, Path):
        return str(x)
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def write_manifest(path: str | Path, cfg: ExperimentConfig, wall_time: float, extra: dict | None = None) -> None:
    """Run metadata: config echo, seed, library versions and wall time."""
    doc = {
        "experiment": cfg.name,
        "seed": cfg.base.seed,
        "config": asdict(cfg.base),
        "grid": list(cfg.grid),
        "replicas": cfg.replicas,
        "params": cfg.params,
        "versions": {"paritylab": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()},
        "wall_time_s": wall_time,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(time.time() - wall_time)),
    }
    if extra:
        doc["results"] = extra
    Path(path).write_text(json.dumps(to_jsonable(doc), indent=2) + "\n")


def markers_from_csv(path: str | Path, axis: str) -> dict:
    """Recompute sweep markers from a raw sweep CSV alone."""
    rows = list(csv.DictReader(open(path)))
    values = sorted({float(r[axis]) for r in rows})
    reps = max(int(r["replica"]) for r in rows) + 1
    shape = (len(values), reps)
    steps, conv, fail, red = np.full(shape, np.nan), np.zeros(shape, bool), np.zeros(shape, bool), np.zeros(shape)
    for r in rows:
        j, i = values.index(float(r[axis])), int(r["replica"])
        steps[j, i] = float(r["steps"]) if r["steps"] else np.nan
        conv[j, i], fail[j, i], red[j, i] = r["converged"] == "1", r["failed"] == "1", float(r["reduction"])
    res = SweepResult(axis, 0, np.array(values), steps, conv, fail, red, {})
    ms = res.mean_steps()
    if axis == "p_e":
        lim = limit_failed(res)
        return {
            "p_e_star": refine_minimum(res.values, ms) if np.isfinite(ms).any() else None,
            "p_e_lim": _first_above_success(res.values, lim, np.isfinite(ms)),
        }
    bad = ~conv.all(axis=1)
    return {"alpha_lim": _first_above_success(res.values, bad, ~bad)}


# ------------------------------------------------------------------ gradcheck


@dataclass
class GradcheckReport:
    fd_rows: list[dict]
    mc_rows: list[dict]

    @property
    def fd_max_rel(self) -> dict:
        out: dict = {}
        for r in self.fd_rows:
            out[r["node"]] = max(out.get(r["node"], 0.0), r["rel_err"])
        return out

    @property
    def mc_max_z(self) -> dict:
        """Largest single-statistic z per oracle (projected for vector estimates)."""
        out: dict = {}
        for r in self.mc_rows:
            out[r["oracle"]] = max(out.get(r["oracle"], 0.0), r["z"])
        return out

    def to_csv(self, path: str | Path) -> None:
        _write_dicts(path, self.fd_rows)
        _write_dicts(Path(path).with_name(Path(path).stem + "_mc.csv"), self.mc_rows)


def _fd_rel(g: np.ndarray, fd: np.ndarray) -> float:
    return float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12))


def run_gradcheck(
    seed: int = 0,
    instances: int = 100,
    sizes: Iterable[int] = range(3, 9),
    mc_sizes: Iterable[int] = (5, 10, 20),
    mc_scales: Iterable[float] = (0.5, 1.0, 2.0),
    reps: int = 100_000,
) -> GradcheckReport:
    """Analytic gradients against central differences and expected gradients against Monte Carlo.

    Finite-difference rows cover the sum, naive-product, neutral-element and
    XOR nodes on ``instances`` random problems each. Monte-Carlo rows report
    |analytic - estimate| / stderr per (N, p_e). Vector estimates are
    reduced to one statistic by projecting onto a random unit direction drawn
    before sampling; the largest per-component z is reported alongside.
    """
    from paritylab import grad

    sizes = list(sizes)
    rng = data.stream(seed, "gradcheck")
    nodes = {
        "sum": (grad.sum_risk, grad.sum_grad, False),
        "naive_product": (grad.naive_product_risk, grad.naive_product_grad, False),
        "ne_product": (grad.ne_product_risk, grad.ne_product_grad, False),
        "xor": (grad.xor_risk, grad.xor_grad, True),
    }
    fd_rows = []
    for name, (risk, g, binary) in nodes.items():
        for i in range(instances):
            N = sizes[i % len(sizes)]
            X = rng.integers(0, 2, (12, N)).astype(float) if binary else rng.normal(size=(12, N))
            w, wt = rng.normal(0.5, 0.4, N), rng.integers(0, 2, N).astype(float)
            fd = grad.fd_grad(lambda v: risk(X, v, wt), w)
            fd_rows.append({"node": name, "instance": i, "N": N, "rel_err": _fd_rel(g(X, w, wt), fd)})
    mc_rows = []
    for N in mc_sizes:
        for s in mc_scales:
            p = s / N
            w, wt = rng.normal(0.5, 0.4, N), rng.integers(0, 2, N).astype(float)
            u = rng.standard_normal(N)
            u /= np.linalg.norm(u)
            est = stats.mc_expected_gradient(w, wt, p, reps=reps, seed=seed + N, direction=u)
            exact = grad.expected_xor_grad_bernoulli(w, wt, p)
            z = np.abs(est.mean - exact) / est.stderr
            zp = abs(est.projected[0] - u @ exact) / est.projected[1]
            mc_rows.append({"oracle": "bernoulli", "N": N, "p_e": p, "z": float(zp), "max_component_z": float(np.max(z))})
            fam = grad.GaussianFamilyParams.symmetric(float(rng.uniform(0.0, 0.4)), float(rng.uniform(0.0, 0.1)), 0.5)
            wi, ti = float(rng.normal(0.5, 0.4)), float(rng.integers(0, 2))
            est = stats.mc_expected_grad_gaussian(fam, p, N, wi, ti, reps=reps, seed=seed + N)
            z = abs(est.mean[0] - grad.expected_grad_gaussian(fam, p, N, wi, ti)) / est.stderr[0]
            mc_rows.append({"oracle": "gaussian", "N": N, "p_e": p, "z": float(z), "max_component_z": float(z)})
    return GradcheckReport(fd_rows, mc_rows)

"""SGD on a layer of P independent XOR units against a binary oracle.

The layer maps an M x N bit batch to M x P outputs. All units see the same
batch; each column of ``W`` only ever receives its own gradient, so a unit's
trajectory does not depend on how many other units are trained alongside it.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from paritylab import data, stats
from paritylab.grad import loo_prod
from paritylab.nodes import DimensionError

DIVERGENCE_LIMIT = 1e6
TRACE_HEADER = ["step", "l1", "mu0", "sig0", "mu1", "sig1", "loss"]


@dataclass
class TrainConfig:
    N: int
    P: int = 1
    M: int = 100
    p_e: float | None = None
    p_w: float = 0.5
    alpha: float = 0.1
    S: int = 25_000
    seed: int = 0
    convergence_threshold: float = 0.01
    init_mu: float = 0.5
    init_sigma_sq: float = 0.25
    fixed_dataset: bool = False
    log_every: int = 1

    def __post_init__(self):
        if self.p_e is None:
            self.p_e = 1.0 / self.N
        self.validate()

    def validate(self) -> None:
        if min(self.N, self.P, self.M, self.S, self.log_every) < 1:
            raise ValueError("N, P, M, S and log_every must be positive")
        if not 0.0 <= self.p_e <= 1.0 or not 0.0 <= self.p_w <= 1.0:
            raise ValueError("p_e and p_w must be probabilities")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not 0.0 < self.convergence_threshold < 1.0:
            raise ValueError("convergence_threshold must lie in (0, 1)")
        if self.init_sigma_sq < 0:
            raise ValueError("init_sigma_sq must be non-negative")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "TrainConfig":
        """Read a JSON object or flat ``key = value`` file."""
        text = Path(path).read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError:
            raw = {}
            for line in text.splitlines():
                line = line.split("#", 1)[0].strip()
                if not line or line.startswith("["):
                    continue
                key, _, value = line.partition("=")
                raw[key.strip()] = json.loads(value.strip().lower() if value.strip() in ("true", "false") else value.strip())
        known = {f for f in cls.__dataclass_fields__}
        raw = {k: v for k, v in raw.items() if k in known}
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw)


@dataclass
class TrainTrace:
    step: np.ndarray
    l1: np.ndarray
    mu0: np.ndarray
    sig0: np.ndarray
    mu1: np.ndarray
    sig1: np.ndarray
    loss: np.ndarray
    convergence_step: int | None
    failed: bool
    W: np.ndarray = field(repr=False)

    @property
    def converged(self) -> bool:
        return self.convergence_step is not None

    @property
    def distance_reduction(self) -> float:
        """Relative drop of the L1 distance between the first and last record."""
        if not np.isfinite(self.l1[-1]):
            return -np.inf
        return float(1.0 - self.l1[-1] / self.l1[0])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_HEADER)
            for row in zip(self.step, self.l1, self.mu0, self.sig0, self.mu1, self.sig1, self.loss):
                w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


# ------------------------------------------------------------------- maths


def mse_loss(Y: np.ndarray, Y_true: np.ndarray) -> float:
    """Squared error summed over units and averaged over samples."""
    Y = np.asarray(Y, dtype=np.float64)
    Y_true = np.asarray(Y_true, dtype=np.float64)
    if Y.shape != Y_true.shape:
        raise DimensionError(f"shape mismatch {Y.shape} vs {Y_true.shape}")
    Y = Y.reshape(Y.shape[0], -1)
    return float(np.sum((Y - Y_true.reshape(Y.shape)) ** 2) / Y.shape[0])


# Large batches feeding many units are folded onto their distinct rows first;
# the per-unit cost then scales with the number of distinct inputs, not M.
_COMPRESS_MIN_M = 2048
_COMPRESS_MIN_P = 4


def _distinct_rows(batch: data.SparseBatch) -> tuple[np.ndarray, np.ndarray]:
    rows, counts = np.unique(np.sort(batch.cols, axis=1), axis=0, return_counts=True)
    return rows, counts.astype(np.float64)


def _factors(W: np.ndarray, cols: np.ndarray) -> np.ndarray:
    Wp = np.vstack([W, np.zeros((1, W.shape[1]))])
    return 1.0 - 2.0 * Wp[cols]


def layer_forward(W: np.ndarray, batch: data.SparseBatch) -> np.ndarray:
    """Outputs of all units on the batch, shape M x P."""
    return 0.5 * (1.0 - np.prod(_factors(W, batch.cols), axis=1))


def layer_grad(W: np.ndarray, batch: data.SparseBatch, W_true: np.ndarray) -> tuple[np.ndarray, float]:
    """Gradient of :func:`mse_loss` w.r.t. ``W`` and the loss itself."""
    N, P = W.shape
    if batch.N != N or W_true.shape != W.shape:
        raise DimensionError(f"batch N={batch.N}, W {W.shape}, oracle {W_true.shape}")
    M = batch.M
    cols, counts = _distinct_rows(batch) if M >= _COMPRESS_MIN_M and P >= _COMPRESS_MIN_P else (batch.cols, None)
    a = _factors(W, cols)
    pa = np.prod(a, axis=1)
    pt = np.prod(_factors(W_true, cols), axis=1)
    resid = 0.5 * (pt - pa)
    weight = (2.0 / M) * resid if counts is None else (2.0 / M) * counts[:, None] * resid
    loss = float(np.sum(resid**2 if counts is None else counts[:, None] * resid**2) / M)
    if a.shape[1] == 0:
        return np.zeros_like(W), loss
    contrib = weight[:, None, :] * loo_prod(a, axis=1)
    flat = (cols[:, :, None] * P + np.arange(P)[None, None, :]).ravel()
    g = np.bincount(flat, weights=contrib.ravel(), minlength=(N + 1) * P)
    return g.reshape(N + 1, P)[:N], loss


def sgd_step(W: np.ndarray, batch: data.SparseBatch, oracle: np.ndarray, alpha: float) -> np.ndarray:
    g, _ = layer_grad(W, batch, oracle)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient")
    return W - alpha * g


def mean_l1(W: np.ndarray, W_true: np.ndarray) -> float:
    return float(np.mean(np.abs(W - W_true)))


# ------------------------------------------------------------------ training


def init_state(cfg: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    oracle = data.sample_oracle(cfg.N, cfg.P, cfg.p_w, cfg.seed)
    W = data.gaussian_init(cfg.N, cfg.P, cfg.seed, cfg.init_mu, cfg.init_sigma_sq)
    return W, oracle


def train(
    cfg: TrainConfig,
    callback: Callable[[int, np.ndarray, data.SparseBatch | None], bool | None] | None = None,
    W0: np.ndarray | None = None,
    run_to_end: bool = False,
) -> TrainTrace:
    """Run SGD until the mean L1 distance drops below the threshold or S steps pass.

    ``callback(step, W, batch)`` is invoked after every step (and once at step
    0 with ``batch=None``); returning ``True`` stops training early.
    A run whose weights leave ``|w| <= 1e6`` is reported as failed. With
    ``run_to_end`` training continues past convergence until step S.
    """
    cfg.validate()
    W, oracle = init_state(cfg)
    if W0 is not None:
        W = np.array(W0, dtype=np.float64).reshape(W.shape)
    rec: dict[str, list] = {k: [] for k in TRACE_HEADER}

    def log(k: int, loss: float) -> float:
        fm = stats.family_moments(W, oracle)
        l1 = mean_l1(W, oracle)
        for key, val in zip(TRACE_HEADER, (k, l1, fm.mu0, fm.sig0_sq, fm.mu1, fm.sig1_sq, loss)):
            rec[key].append(np.nan if val is None else val)
        return l1

    fixed = data.sample_bernoulli_batch(cfg.N, cfg.M, cfg.p_e, cfg.seed, 0) if cfg.fixed_dataset else None
    log(0, float("nan"))
    if callback is not None:
        callback(0, W, None)
    conv, failed = None, False
    for k in range(1, cfg.S + 1):
        batch = fixed if fixed is not None else data.sample_bernoulli_batch(cfg.N, cfg.M, cfg.p_e, cfg.seed, k)
        g, loss = layer_grad(W, batch, oracle)
        W = W - cfg.alpha * g
        if not np.all(np.isfinite(W)) or np.max(np.abs(W)) > DIVERGENCE_LIMIT:
            failed = True
            log(k, loss)
            break
        l1 = mean_l1(W, oracle)
        done = l1 < cfg.convergence_threshold
        if done and conv is None:
            conv = k
        if k == conv or k % cfg.log_every == 0 or k == cfg.S:
            log(k, loss)
        stop = callback(k, W, batch) if callback is not None else None
        if done and not run_to_end:
            break
        if stop:
            break
    arrays = {key: np.asarray(v, dtype=np.float64) for key, v in rec.items()}
    arrays["step"] = arrays["step"].astype(np.int64)
    return TrainTrace(**arrays, convergence_step=conv, failed=failed, W=W)


# -------------------------------------------------------------- truth tables


def _subset_products(a: np.ndarray) -> np.ndarray:
    """Products of ``a`` over every subset, indexed by the subset's bit code."""
    out = np.ones(1)
    for ai in a:
        out = np.concatenate([out, out * ai])
    return out


def truth_table_outputs(w: np.ndarray) -> np.ndarray:
    """XOR-node output on all 2^N inputs; entry ``c`` is the input with bits of ``c``."""
    w = np.asarray(w, dtype=np.float64)
    if w.size > 24:
        raise ValueError("truth tables are limited to N <= 24")
    return 0.5 * (1.0 - _subset_products(1.0 - 2.0 * w))


def truth_table_accuracy(w: np.ndarray, w_true: np.ndarray, threshold: float = 0.5) -> float:
    """Fraction of all 2^N inputs on which the thresholded unit matches the oracle parity."""
    w = np.asarray(w, dtype=np.float64)
    w_true = np.asarray(w_true, dtype=np.float64)
    if w.shape != w_true.shape:
        raise DimensionError("w and w_true differ in shape")
    pred = truth_table_outputs(w) > threshold
    target = truth_table_outputs(w_true) > 0.5
    return float(np.mean(pred == target))


def input_codes(batch: data.SparseBatch) -> np.ndarray:
    """Integer code sum_i b_i 2^i of every row (bit i of the code is input i)."""
    if batch.N > 62:
        raise ValueError("input codes need N <= 62")
    powers = np.append(np.left_shift(1, np.arange(batch.N, dtype=np.int64)), 0)
    return powers[batch.cols].sum(axis=1)


from paritylab.mlp import MLPResult, mlp_train  # noqa: E402

__all__ = [
    "TrainConfig",
    "TrainTrace",
    "MLPResult",
    "mse_loss",
    "layer_forward",
    "layer_grad",
    "sgd_step",
    "train",
    "truth_table_accuracy",
    "truth_table_outputs",
    "input_codes",
    "mlp_train",
    "mean_l1",
]


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)

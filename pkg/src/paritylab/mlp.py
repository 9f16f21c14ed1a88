"""A small ReLU multilayer perceptron trained with plain SGD on MSE.

Used as a baseline on the same sparse input stream as the XOR units. Inputs
are fed in bipolar form (1 - 2b) and the single output is linear; a prediction
is ``output > 0.5``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from paritylab import data


@dataclass
class MLPResult:
    step: np.ndarray
    coverage: np.ndarray
    train_acc: np.ndarray
    val_acc: np.ndarray
    loss: np.ndarray
    params: list
    diverged: bool = False

    def val_at_coverage(self, coverage: float) -> float | None:
        """Validation accuracy at the last evaluation with coverage <= ``coverage``."""
        idx = np.flatnonzero(self.coverage <= coverage)
        return None if idx.size == 0 else float(self.val_acc[idx[-1]])


def _init(sizes: list[int], rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        params.append((W, np.zeros(fan_out)))
    return params


def mlp_forward(params, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    acts = [X]
    h = X
    for i, (W, b) in enumerate(params):
        h = h @ W + b
        if i < len(params) - 1:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return h[:, 0], acts


def _backward(params, acts: list[np.ndarray], y: np.ndarray) -> tuple[list, float]:
    out = acts[-1][:, 0]
    M = y.size
    loss = float(np.mean((out - y) ** 2))
    delta = (2.0 / M) * (out - y)[:, None]
    grads = []
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        grads.append((acts[i].T @ delta, delta.sum(axis=0)))
        if i > 0:
            delta = (delta @ W.T) * (acts[i] > 0)
    return grads[::-1], loss


def _all_inputs(N: int) -> np.ndarray:
    codes = np.arange(2**N, dtype=np.int64)
    return ((codes[:, None] >> np.arange(N)) & 1).astype(np.float64)


def mlp_train(
    cfg,
    arch: tuple[int, ...] = (128, 128, 32),
    act: str = "relu",
    lr: float | None = None,
    eval_every: int = 10,
    target: np.ndarray | None = None,
) -> MLPResult:
    """Train on the same batch stream as :func:`paritylab.trainer.train` with ``cfg``.

    ``target`` overrides the oracle parity with an arbitrary 0/1 truth table
    (indexed by input code). Accuracies are tracked on the seen inputs
    (training) and on the whole table (validation).
    """
    if act != "relu":
        raise ValueError("only relu activations are supported")
    N = cfg.N
    if N > 20:
        raise ValueError("MLP truth-table evaluation is limited to N <= 20")
    lr = cfg.alpha if lr is None else lr
    table_bits = _all_inputs(N)
    if target is None:
        w_true = data.sample_oracle(N, 1, cfg.p_w, cfg.seed)[:, 0]
        target = (table_bits @ w_true) % 2
    target = np.asarray(target, dtype=np.float64)
    X_table = 1.0 - 2.0 * table_bits
    params = _init([N, *arch, 1], data.stream(cfg.seed, "mlp_init"))
    seen = np.zeros(2**N, dtype=bool)
    powers = np.left_shift(1, np.arange(N, dtype=np.int64))
    rec = {k: [] for k in ("step", "coverage", "train_acc", "val_acc", "loss")}
    fixed = data.sample_bernoulli_batch(N, cfg.M, cfg.p_e, cfg.seed, 0) if cfg.fixed_dataset else None
    loss = float("nan")
    diverged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, cfg.S + 1):
            batch = fixed if fixed is not None else data.sample_bernoulli_batch(N, cfg.M, cfg.p_e, cfg.seed, k)
            bits = batch.bits.astype(np.float64)
            codes = bits.astype(np.int64) @ powers
            seen[codes] = True
            out, acts = mlp_forward(params, 1.0 - 2.0 * bits)
            grads, loss = _backward(params, acts, target[codes])
            params = [(W - lr * gW, b - lr * gb) for (W, b), (gW, gb) in zip(params, grads)]
            if not np.isfinite(loss) or not all(np.all(np.isfinite(W)) for W, _ in params):
                diverged = True
                break
            if k % eval_every == 0 or k == cfg.S:
                pred = mlp_forward(params, X_table)[0] > 0.5
                correct = pred == (target > 0.5)
                rec["step"].append(k)
                rec["coverage"].append(seen.mean())
                rec["train_acc"].append(correct[seen].mean())
                rec["val_acc"].append(correct.mean())
                rec["loss"].append(loss)
    return MLPResult(**{k: np.asarray(v) for k, v in rec.items()}, params=params, diverged=diverged)

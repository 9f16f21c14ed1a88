"""Statistical checks on weight distributions and a Monte-Carlo gradient oracle."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from paritylab import data
from paritylab.grad import GaussianFamilyParams, loo_prod

# Calibrated against true-normal samples at the sizes used (see tests).
GAUSSIAN_QQ_THRESHOLD = 0.995


@dataclass(frozen=True)
class FamilyMoments:
    """Moments of the weights split by oracle target. Absent families are ``None``."""

    mu0: float | None
    sig0_sq: float | None
    mu1: float | None
    sig1_sq: float | None
    n0: int
    n1: int

    @property
    def symmetry_residual(self) -> tuple[float, float] | None:
        """(|mu0 - (1 - mu1)|, |sig0^2 - sig1^2|), or None if a family is empty."""
        if self.n0 == 0 or self.n1 == 0:
            return None
        return abs(self.mu0 - (1.0 - self.mu1)), abs(self.sig0_sq - self.sig1_sq)


def family_moments(W: np.ndarray, oracle: np.ndarray) -> FamilyMoments:
    W = np.asarray(W, dtype=np.float64)
    oracle = np.asarray(oracle)
    if W.shape != oracle.shape:
        raise ValueError(f"shape mismatch {W.shape} vs {oracle.shape}")
    out = []
    for target in (0, 1):
        vals = W[oracle == target]
        if vals.size:
            out += [float(vals.mean()), float(vals.var()), vals.size]
        else:
            out += [None, None, 0]
    return FamilyMoments(out[0], out[1], out[3], out[4], out[2], out[5])


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class QQReport:
    correlation: float
    sample_count: int
    theoretical_q: np.ndarray
    empirical_q: np.ndarray
    quantile_source: str = "scipy.special.ndtri at (i - 0.5) / n"

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theoretical_q", "empirical_q"])
            w.writerows(zip(self.theoretical_q.tolist(), self.empirical_q.tolist()))


def qq_gaussian(samples: np.ndarray) -> QQReport:
    """Correlation between standardised order statistics and normal quantiles."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    if n < 20:
        raise InsufficientDataError(f"need at least 20 samples, got {n}")
    sd = x.std()
    emp = (x - x.mean()) / sd if sd > 0 else np.zeros_like(x)
    theo = ndtri((np.arange(1, n + 1) - 0.5) / n)
    corr = float(np.corrcoef(theo, emp)[0, 1]) if sd > 0 else 0.0
    return QQReport(correlation=corr, sample_count=n, theoretical_q=theo, empirical_q=emp)


@dataclass(frozen=True)
class MCEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    samples: int
    projected: tuple[float, float] | None = None


def _xor_grad_rows(B: np.ndarray, w: np.ndarray, w_true: np.ndarray) -> np.ndarray:
    """Per-sample XOR gradients (M x N), each row a batch of size one."""
    a = 1.0 - 2.0 * B * w
    at = 1.0 - 2.0 * B * w_true
    resid = 0.5 * (np.prod(at, axis=1) - np.prod(a, axis=1))
    return 2.0 * resid[:, None] * B * loo_prod(a)


def mc_expected_gradient(
    w: np.ndarray,
    w_true: np.ndarray,
    p_e: float,
    reps: int,
    seed: int,
    batch_size: int = 1,
    direction: np.ndarray | None = None,
) -> MCEstimate:
    """Mean of the XOR gradient over ``reps`` fresh Bernoulli batches of ``batch_size`` rows.

    With ``direction`` the estimate also carries the mean and standard error
    of the gradient projected onto it, a single statistic for the whole vector.
    """
    if reps < 100:
        raise ValueError("reps must be at least 100")
    w = np.asarray(w, dtype=np.float64)
    w_true = np.asarray(w_true, dtype=np.float64)
    N = w.size
    chunk = max(1, 200_000 // (N * batch_size))
    grads = []
    for start in range(0, reps, chunk):
        n = min(chunk, reps - start)
        rng = data.stream(seed, "mc_grad", 0, start)
        B = (rng.random((n * batch_size, N)) < p_e).astype(np.float64)
        g = _xor_grad_rows(B, w, w_true).reshape(n, batch_size, N).mean(axis=1)
        grads.append(g)
    G = np.concatenate(grads)
    proj = None
    if direction is not None:
        g = G @ np.asarray(direction, dtype=np.float64)
        proj = (float(g.mean()), float(g.std(ddof=1) / np.sqrt(reps)))
    return MCEstimate(mean=G.mean(axis=0), stderr=G.std(axis=0, ddof=1) / np.sqrt(reps), samples=reps * batch_size, projected=proj)


def mc_expected_grad_gaussian(
    fam: GaussianFamilyParams, p_e: float, N: int, w_i: float, w_true_i: float, reps: int, seed: int
) -> MCEstimate:
    """Monte-Carlo estimate of the expected gradient of one weight whose N-1 peers
    are drawn from the Gaussian families (targets i.i.d. Bernoulli(p_w))."""
    if reps < 100:
        raise ValueError("reps must be at least 100")
    chunk = max(1, 200_000 // N)
    vals = []
    for start in range(0, reps, chunk):
        n = min(chunk, reps - start)
        rng = data.stream(seed, "mc_gauss", 0, start)
        t = (rng.random((n, N - 1)) < fam.p_w).astype(np.float64)
        mu = np.where(t == 1, fam.mu1, fam.mu0)
        sd = np.sqrt(np.where(t == 1, fam.sigma1_sq, fam.sigma0_sq))
        w_rest = mu + sd * rng.standard_normal((n, N - 1))
        w = np.column_stack([np.full(n, w_i), w_rest])
        wt = np.column_stack([np.full(n, w_true_i), t])
        B = (rng.random((n, N)) < p_e).astype(np.float64)
        a = 1.0 - 2.0 * B * w
        at = 1.0 - 2.0 * B * wt
        resid = 0.5 * (np.prod(at, axis=1) - np.prod(a, axis=1))
        vals.append(2.0 * resid * B[:, 0] * np.prod(a[:, 1:], axis=1))
    v = np.concatenate(vals)
    return MCEstimate(mean=np.atleast_1d(v.mean()), stderr=np.atleast_1d(v.std(ddof=1) / np.sqrt(reps)), samples=reps)

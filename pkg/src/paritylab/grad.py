"""Closed-form risks, gradients and Hessians for every node type.

Conventions
-----------
``X`` is an M x N matrix of real inputs, ``B`` an M x N matrix of bits.
Every empirical risk is the batch mean of the squared error against an oracle
with the same architecture and weights ``w_true``:

    risk(w) = (1/M) sum_m (f(w, x_m) - f(w_true, x_m))^2

For the neutral-element product we write ``z = x - 1`` and ``a = w z + 1``.
The XOR node is the neutral-element product on bipolar inputs ``x = 1 - 2b``
(so ``z = -2b``) wrapped in ``y = (1 - prod a) / 2``, which scales the risk,
gradient and Hessian by exactly 1/4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from paritylab.nodes import DimensionError

FD_STEP = 1e-5
PSD_TOL = -1e-10


def _batch(X: ArrayLike, w: ArrayLike, w_true: ArrayLike) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    w = np.asarray(w, dtype=np.float64)
    w_true = np.asarray(w_true, dtype=np.float64)
    if w.ndim != 1 or w.shape != w_true.shape or X.shape[1] != w.size:
        raise DimensionError(f"inputs {X.shape}, w {w.shape}, w_true {w_true.shape} are incompatible")
    return X, w, w_true


def loo_prod(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Leave-one-out products along ``axis`` without division.

    ``out[..., j] = prod_{i != j} a[..., i]``; exact even when some entries are 0.
    """
    a = np.moveaxis(np.asarray(a, dtype=np.float64), axis, -1)
    ones = np.ones(a.shape[:-1] + (1,))
    left = np.cumprod(np.concatenate([ones, a[..., :-1]], axis=-1), axis=-1)
    right = np.cumprod(np.concatenate([ones, a[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return np.moveaxis(left * right, -1, axis)


def lto_prod(a: np.ndarray) -> np.ndarray:
    """Leave-two-out products over the last axis: ``out[..., j, l] = prod_{i != j, l} a_i``.

    The diagonal holds the leave-one-out product.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[-1]
    out = np.empty(a.shape + (n,))
    for j in range(n):
        aj = a.copy()
        aj[..., j] = 1.0
        out[..., j, :] = loo_prod(aj)
    return out


# ---------------------------------------------------------------- sum node


def sum_risk(X: ArrayLike, w: ArrayLike, w_true: ArrayLike) -> float:
    X, w, w_true = _batch(X, w, w_true)
    return float(np.mean((X @ (w - w_true)) ** 2))


def sum_grad(X: ArrayLike, w: ArrayLike, w_true: ArrayLike) -> np.ndarray:
    X, w, w_true = _batch(X, w, w_true)
    return (2.0 / X.shape[0]) * X.T @ (X @ (w - w_true))


def sum_hessian(X: ArrayLike) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return (2.0 / X.shape[0]) * X.T @ X


# ------------------------------------------------------- naive product node


def _input_energy(X: np.ndarray) -> float:
    return float(np.mean(np.prod(X**2, axis=1)))


def naive_product_risk(X: ArrayLike, w: ArrayLike, w_true: ArrayLike) -> float:
    X, w, w_true = _batch(X, w, w_true)
    px = np.prod(X, axis=1)
    return float(np.mean((np.prod(w) * px - np.prod(w_true) * px) ** 2))


def naive_product_grad(X: ArrayLike, w: ArrayLike, w_true: ArrayLike) -> np.ndarray:
    X, w, w_true = _batch(X, w, w_true)
    D = _input_energy(X)
    return 2.0 * D * loo_prod(w) * (np.prod(w) - np.prod(w_true))


def naive_product_hessian(X: ArrayLike, w: ArrayLike, w_true: ArrayLike) -> np.ndarray:
    X, w, w_true = _batch(X, w, w_true)
    D = _input_energy(X)
    H = 2.0 * D * lto_prod(w) * (2.0 * np.prod(w) - np.prod(w_true))
    np.fill_diagonal(H, 2.0 * D * loo_prod(w) ** 2)
    return H


# -------------------------------------------- neutral-element product node


def _ne_terms(X: np.ndarray, w: np.ndarray, w_true: np.ndarray):
    z = X - 1.0
    a = z * w + 1.0
    a_true = z * w_true + 1.0
    return z, a, np.prod(a, axis=1), np.prod(a_true, axis=1)


def ne_product_risk(X: ArrayLike, w: ArrayLike, w_true: ArrayLike) -> float:
    X, w, w_true = _batch(X, w, w_true)
    _, _, pa, pt = _ne_terms(X, w, w_true)
    return float(np.mean((pa - pt) ** 2))


def ne_product_grad(X: ArrayLike, w: ArrayLike, w_true: ArrayLike) -> np.ndarray:
    X, w, w_true = _batch(X, w, w_true)
    z, a, pa, pt = _ne_terms(X, w, w_true)
    per_sample = z * loo_prod(a) * (pa - pt)[:, None]
    return (2.0 / X.shape[0]) * per_sample.sum(axis=0)


def ne_product_hessian(X: ArrayLike, w: ArrayLike, w_true: ArrayLike) -> np.ndarray:
    X, w, w_true = _batch(X, w, w_true)
    z, a, pa, pt = _ne_terms(X, w, w_true)
    M, N = X.shape
    zz = z[:, :, None] * z[:, None, :]
    off = zz * lto_prod(a) * (2.0 * pa - pt)[:, None, None]
    H = (2.0 / M) * off.sum(axis=0)
    diag = (2.0 / M) * np.sum(z**2 * loo_prod(a) ** 2, axis=0)
    H[np.diag_indices(N)] = diag
    return H


# ----------------------------------------------------------------- XOR node


def _bits(B: ArrayLike) -> np.ndarray:
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if np.any((B != 0) & (B != 1)):
        raise ValueError("XOR node expects binary inputs")
    return B


def xor_risk(B: ArrayLike, w: ArrayLike, w_true: ArrayLike) -> float:
    B = _bits(B)
    X, w, w_true = _batch(1.0 - 2.0 * B, w, w_true)
    _, _, pa, pt = _ne_terms(X, w, w_true)
    return float(np.mean((0.5 * (pt - pa)) ** 2))


def xor_grad(B: ArrayLike, w: ArrayLike, w_true: ArrayLike) -> np.ndarray:
    return ne_product_grad(1.0 - 2.0 * _bits(B), w, w_true) / 4.0


def xor_hessian(B: ArrayLike, w: ArrayLike, w_true: ArrayLike) -> np.ndarray:
    return ne_product_hessian(1.0 - 2.0 * _bits(B), w, w_true) / 4.0


# ----------------------------------------------------- expected gradients


def expected_xor_grad_bernoulli(w: ArrayLike, w_true: ArrayLike, p_e: float) -> np.ndarray:
    """Exact expectation of ``xor_grad`` over i.i.d. Bernoulli(p_e) inputs."""
    if not 0.0 < p_e < 1.0:
        raise ValueError(f"p_e must lie in (0, 1), got {p_e}")
    w = np.asarray(w, dtype=np.float64)
    w_true = np.asarray(w_true, dtype=np.float64)
    if w.shape != w_true.shape or w.ndim != 1:
        raise DimensionError("w and w_true must be vectors of equal length")
    self_term = 4 * p_e * w**2 - 4 * p_e * w + 1
    cross_term = 4 * p_e * w * w_true - 2 * p_e * (w + w_true) + 1
    return p_e * ((2 * w - 1) * loo_prod(self_term) - (2 * w_true - 1) * loo_prod(cross_term))


@dataclass(frozen=True)
class GaussianFamilyParams:
    """Two Gaussian weight families split by oracle target (0 and 1)."""

    mu0: float
    sigma0_sq: float
    mu1: float
    sigma1_sq: float
    p_w: float = 0.5

    def __post_init__(self):
        if self.sigma0_sq < 0 or self.sigma1_sq < 0:
            raise ValueError("family variances must be non-negative")
        if not 0.0 <= self.p_w <= 1.0:
            raise ValueError(f"p_w must lie in [0, 1], got {self.p_w}")

    @classmethod
    def symmetric(cls, mu: float, sigma_sq: float, p_w: float = 0.5) -> "GaussianFamilyParams":
        return cls(mu, sigma_sq, 1.0 - mu, sigma_sq, p_w)


@dataclass(frozen=True)
class ABTerms:
    A0: float
    A1: float
    B0: float
    B1: float


def ab_terms(fam: GaussianFamilyParams, p_e: float) -> ABTerms:
    """Per-weight expectations of ``a_i^2`` (A) and ``a_i a_i^true`` (B) under each family."""

    def A(mu, s2):
        return 4 * p_e * (mu**2 + s2) - 4 * p_e * mu + 1

    return ABTerms(
        A0=A(fam.mu0, fam.sigma0_sq),
        A1=A(fam.mu1, fam.sigma1_sq),
        B0=1 - 2 * p_e * fam.mu0,
        B1=1 - 2 * p_e * (1 - fam.mu1),
    )


def expected_grad_gaussian(
    fam: GaussianFamilyParams,
    p_e: float,
    N: int,
    w_i: float,
    w_true_i: float,
    exact_leave_one_out: bool = False,
) -> float:
    """Expected gradient of weight ``i`` when the other N-1 weights follow the families.

    By default the other weights' target proportion is taken to be ``p_w``.
    With ``exact_leave_one_out`` it is corrected for removing weight ``i``
    from a column holding exactly ``p_w * N`` ones.
    """
    if not 0.0 < p_e < 1.0:
        raise ValueError(f"p_e must lie in (0, 1), got {p_e}")
    if N < 1:
        raise ValueError("N must be positive")
    p = fam.p_w
    if exact_leave_one_out and N > 1:
        p = (p * N - w_true_i) / (N - 1)
        p = min(max(p, 0.0), 1.0)
    t = ab_terms(fam, p_e)
    A = (1 - p) * t.A0 + p * t.A1
    Bm = (1 - p) * t.B0 + p * t.B1
    return float(p_e * ((2 * w_i - 1) * A ** (N - 1) - (2 * w_true_i - 1) * Bm ** (N - 1)))


def grad_magnitude_vs_pe(p_e: ArrayLike, N: int) -> np.ndarray | float:
    """Expected gradient magnitude at the symmetric init, as a function of p_e."""
    p_e = np.asarray(p_e, dtype=np.float64)
    out = p_e * (1 - p_e) ** (N - 1)
    return float(out) if out.ndim == 0 else out


def optimal_pe(N: int) -> float:
    """Root of d/dp [p (1-p)^(N-1)]."""
    if N < 1:
        raise ValueError("N must be positive")
    return 1.0 / N


# ----------------------------------------------------------- diagnostics


def psd_witness(H: ArrayLike, tol: float = PSD_TOL) -> np.ndarray | None:
    """Return a direction of negative curvature, or ``None`` if ``H`` is PSD."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError("Hessian must be square")
    scale = max(1.0, float(np.max(np.abs(H))))
    if not np.allclose(H, H.T, rtol=0, atol=1e-12 * scale):
        raise ValueError("Hessian must be symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (H + H.T))
    if vals[0] < tol:
        return vecs[:, 0]
    return None


def fd_grad(f, w: ArrayLike, h: float = FD_STEP) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    w = np.asarray(w, dtype=np.float64)
    g = np.empty_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        g[j] = (f(w + e) - f(w - e)) / (2 * h)
    return g


def fd_hessian(f, w: ArrayLike, h: float = 1e-4) -> np.ndarray:
    """Second-order central finite-difference Hessian of a scalar function."""
    w = np.asarray(w, dtype=np.float64)
    n = w.size
    H = np.empty((n, n))
    E = np.eye(n) * h
    for j in range(n):
        for l in range(j, n):
            H[j, l] = (
                f(w + E[j] + E[l]) - f(w + E[j] - E[l]) - f(w - E[j] + E[l]) + f(w - E[j] - E[l])
            ) / (4 * h * h)
            H[l, j] = H[j, l]
    return H

"""Forward passes of the four node types.

All functions take a single weight vector and a single input vector; batching
is the caller's job. Inputs for the XOR node are bits, everything else takes
real inputs.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike


class DimensionError(ValueError):
    """Weight and input vectors have incompatible lengths."""


def _pair(w: ArrayLike, x: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.ndim != 1 or x.ndim != 1 or w.shape != x.shape or w.size == 0:
        raise DimensionError(f"expected two non-empty vectors of equal length, got {w.shape} and {x.shape}")
    return w, x


def bipolar(b: ArrayLike) -> np.ndarray:
    """Map bits {0,1} to {+1,-1}."""
    return 1.0 - 2.0 * np.asarray(b, dtype=np.float64)


def sum_forward(w: ArrayLike, x: ArrayLike) -> float:
    w, x = _pair(w, x)
    return float(w @ x)


def naive_product_forward(w: ArrayLike, x: ArrayLike) -> float:
    w, x = _pair(w, x)
    return float(np.prod(w * x))


def ne_product_forward(w: ArrayLike, x: ArrayLike) -> float:
    """Product with neutral element: a zero weight contributes a factor 1."""
    w, x = _pair(w, x)
    return float(np.prod(w * x + (1.0 - w)))


def xor_forward(w: ArrayLike, b: ArrayLike) -> float:
    """Relaxed subset parity. For binary ``w`` this is the GF(2) product <w, b>."""
    w, b = _pair(w, b)
    if np.any((b != 0) & (b != 1)):
        raise ValueError("xor_forward expects binary inputs")
    # a_i = w_i z_i + 1 with z = -2b; equal to w x + (1 - w) for x = 1 - 2b but exact at b = 0
    return 0.5 * (1.0 - float(np.prod(1.0 - 2.0 * w * b)))


def xor_forward_batch(W: ArrayLike, B: ArrayLike) -> np.ndarray:
    """Vectorised XOR layer: ``B`` is M x N bits, ``W`` is N x P. Returns M x P."""
    W = np.asarray(W, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if W.ndim == 1:
        W = W[:, None]
    if B.ndim != 2 or B.shape[1] != W.shape[0]:
        raise DimensionError(f"batch {B.shape} incompatible with weights {W.shape}")
    a = 1.0 - 2.0 * B[:, :, None] * W[None, :, :]
    return 0.5 * (1.0 - np.prod(a, axis=1))


def parity(w_true: ArrayLike, B: ArrayLike) -> np.ndarray:
    """Exact subset parity of each row of ``B`` for a binary support ``w_true``."""
    B = np.asarray(B, dtype=np.int64)
    w_true = np.asarray(w_true, dtype=np.int64)
    return (B @ w_true) % 2

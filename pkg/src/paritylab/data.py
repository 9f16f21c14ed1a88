"""Seeded data generation: sparse Bernoulli batches, one-hot datasets, oracles.

Every random draw goes through :func:`stream`, which derives an independent
generator from ``(master_seed, tag, unit, step)``. Two draws with the same key
are bit-identical no matter in which order or on which thread they happen.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats as sps

# Above this expected number of active bits per row, a dense draw is cheaper
# than rejection sampling of column indices.
_SPARSE_MAX_ACTIVE = 8.0


def _tag_id(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def stream(master_seed: int, tag: str, unit: int = 0, step: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, purpose, unit index, step)."""
    if master_seed < 0 or unit < 0 or step < 0:
        raise ValueError("seed, unit and step must be non-negative")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(_tag_id(tag), int(unit), int(step)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SparseBatch:
    """M x N binary batch stored as padded column indices.

    ``cols[m]`` lists the active columns of row ``m``; unused slots hold the
    sentinel ``N``. Appending a zero row to a weight matrix makes the sentinel
    contribute a neutral factor, so the training loop never needs a mask.
    """

    cols: np.ndarray
    N: int
    p_e: float
    seed: int

    @property
    def M(self) -> int:
        return self.cols.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return np.sum(self.cols < self.N, axis=1)

    @property
    def bits(self) -> np.ndarray:
        out = np.zeros((self.M, self.N + 1), dtype=np.uint8)
        rows = np.repeat(np.arange(self.M), self.cols.shape[1])
        out[rows, self.cols.ravel()] = 1
        return out[:, : self.N]

    @classmethod
    def from_bits(cls, bits: np.ndarray, p_e: float = float("nan"), seed: int = -1) -> "SparseBatch":
        bits = np.asarray(bits).astype(bool)
        M, N = bits.shape
        counts = bits.sum(axis=1)
        K = int(counts.max()) if M else 0
        r, c = np.nonzero(bits)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        cols = np.full((M, K), N, dtype=np.int64)
        cols[r, np.arange(r.size) - starts[r]] = c
        return cls(cols=cols, N=N, p_e=p_e, seed=seed)


def _distinct_columns(rng: np.random.Generator, counts: np.ndarray, N: int) -> np.ndarray:
    """Uniform random subsets of {0..N-1} with the given sizes, as padded rows."""
    M = counts.size
    K = int(counts.max()) if M else 0
    valid = np.arange(K)[None, :] < counts[:, None]
    cols = np.full((M, K), N, dtype=np.int64)
    todo = np.arange(M)
    while todo.size:
        draw = rng.integers(0, N, size=(todo.size, K))
        cols[todo] = np.where(valid[todo], draw, N)
        s = np.sort(cols[todo], axis=1)
        dup = np.any((s[:, 1:] == s[:, :-1]) & (s[:, 1:] < N), axis=1)
        todo = todo[dup]
    return cols


def sample_bernoulli_batch(N: int, M: int, p_e: float, seed: int, step: int = 0, tag: str = "batch") -> SparseBatch:
    """Draw an M x N batch with i.i.d. Bernoulli(p_e) entries."""
    if not 0.0 <= p_e <= 1.0:
        raise ValueError(f"p_e must lie in [0, 1], got {p_e}")
    if N < 1 or M < 1:
        raise ValueError("N and M must be positive")
    rng = stream(seed, tag, 0, step)
    if p_e * N > _SPARSE_MAX_ACTIVE or N <= 64:
        return SparseBatch.from_bits(rng.random((M, N)) < p_e, p_e=p_e, seed=seed)
    counts = rng.binomial(N, p_e, size=M)
    return SparseBatch(cols=_distinct_columns(rng, counts, N), N=N, p_e=p_e, seed=seed)


@dataclass(frozen=True)
class OneHotDataset:
    z: np.ndarray
    k: np.ndarray
    v: np.ndarray


def sample_one_hot_dataset(N: int, M: int, v, seed: int, cyclic: bool = False) -> OneHotDataset:
    """Rows ``z_m = v_m e_{k_m}``; ``k`` uniform, or cycling through 0..N-1 if ``cyclic``."""
    rng = stream(seed, "one_hot")
    k = np.arange(M) % N if cyclic else rng.integers(0, N, size=M)
    v = np.broadcast_to(np.asarray(v, dtype=np.float64), (M,)).copy()
    z = np.zeros((M, N))
    z[np.arange(M), k] = v
    return OneHotDataset(z=z, k=k, v=v)


def sample_oracle(N: int, P: int, p_w: float, seed: int) -> np.ndarray:
    """Binary N x P oracle with exactly round(p_w N) ones per column."""
    if not 0.0 <= p_w <= 1.0:
        raise ValueError(f"p_w must lie in [0, 1], got {p_w}")
    ones = int(np.floor(p_w * N + 0.5))
    W = np.zeros((N, P), dtype=np.float64)
    for p in range(P):
        W[stream(seed, "oracle", p).permutation(N)[:ones], p] = 1.0
    return W


def gaussian_init(N: int, P: int, seed: int, mu: float = 0.5, sigma_sq: float = 0.25) -> np.ndarray:
    """i.i.d. Normal(mu, sigma_sq) weights, one stream per column."""
    sd = np.sqrt(sigma_sq)
    cols = [stream(seed, "init", p).normal(mu, sd, size=N) for p in range(P)]
    return np.stack(cols, axis=1) if cols else np.zeros((N, 0))


def active_bit_pmf(N: int, p_e: float, q: int) -> float:
    """Probability that a Bernoulli(p_e) input of length N has exactly q ones."""
    if not 0 <= q <= N:
        raise ValueError(f"q must lie in [0, {N}], got {q}")
    return float(sps.binom.pmf(q, N, p_e))


def batch_to_csv(batch: SparseBatch, path: str | Path) -> None:
    bits = batch.bits
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "i", "bit"])
        for m in range(bits.shape[0]):
            for i in range(bits.shape[1]):
                w.writerow([m, i, int(bits[m, i])])

"""Sparse Bernoulli batches and reproducible random streams.

Run: python3 notebooks/02_sparse_data.py
"""

# %% Batches store only the active bits of each example.
import numpy as np

from paritylab import data

batch = data.sample_bernoulli_batch(N=1000, M=5, p_e=0.003, seed=7, step=0)
print("active counts per example:", batch.counts)
print("dense shape:", batch.bits.shape, "nonzeros:", int(batch.bits.sum()))

# %% The same (seed, step) always yields the same batch.
again = data.sample_bernoulli_batch(N=1000, M=5, p_e=0.003, seed=7, step=0)
print("reproducible:", np.array_equal(batch.bits, again.bits))

# %% Active-bit counts follow a Binomial(N, p_e) law.
big = data.sample_bernoulli_batch(N=200, M=20_000, p_e=0.01, seed=1)
emp = np.bincount(big.counts, minlength=6)[:6] / big.M
theory = [data.active_bit_pmf(200, 0.01, q) for q in range(6)]
for q, (e, t) in enumerate(zip(emp, theory)):
    print(f"q={q}: empirical {e:.4f} theory {t:.4f}")

# %% Independent streams per purpose keep oracle and batches decoupled.
print(data.sample_oracle(N=12, P=2, p_w=0.5, seed=3).astype(int))

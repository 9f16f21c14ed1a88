"""Product nodes, their gradients, and why sparsity matters.

Run: python3 notebooks/01_nodes_and_gradients.py
"""

# %% The XOR node computes the parity of the bits selected by w.
import numpy as np

from paritylab import grad, nodes

w_true = np.array([1, 0, 1, 1, 0])
for b in ([1, 0, 0, 0, 0], [1, 0, 1, 0, 0], [1, 1, 1, 1, 1]):
    print(b, "->", nodes.xor_forward(w_true, b), "parity", nodes.parity(w_true, np.array([b]))[0])

# %% Analytic gradients agree with central differences.
rng = np.random.default_rng(0)
B = rng.integers(0, 2, size=(64, 5))
w = rng.uniform(0, 1, 5)
analytic = grad.xor_grad(B, w, w_true)
numeric = grad.fd_grad(lambda v: grad.xor_risk(B, v, w_true), w)
print("max |analytic - FD|:", np.max(np.abs(analytic - numeric)))

# %% With dense Gaussian inputs the plain product is non-convex.
X = rng.normal(size=(32, 4))
H = grad.naive_product_hessian(X, np.r_[0.0, np.ones(3)], np.ones(4))
q = grad.psd_witness(H)
print("negative-curvature direction:", np.round(q, 3), "q'Hq =", q @ H @ q)

# %% With one-hot inputs the Hessian becomes diagonal and positive.
from paritylab import data

ds = data.sample_one_hot_dataset(4, 16, 1.0, seed=0, cyclic=True)
print(np.round(grad.ne_product_hessian(ds.z + 1.0, rng.normal(size=4), np.ones(4)), 3))

# %% The expected gradient magnitude peaks at a sparsity of order 1/N.
N = 100
pe = np.geomspace(0.1, 20, 9) / N
print("p_e * N:", np.round(pe * N, 2))
print("|E grad|:", np.round(grad.grad_magnitude_vs_pe(pe, N), 5))
print("optimum p_e * N:", grad.optimal_pe(N) * N)

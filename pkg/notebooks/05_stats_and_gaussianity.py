"""Monte Carlo gradient checks and Gaussianity of trained weights.

Run: python3 notebooks/05_stats_and_gaussianity.py
"""

# %% Closed-form expected gradients agree with Monte Carlo averages.
import numpy as np

from paritylab import grad, stats

rng = np.random.default_rng(0)
N, p_e = 10, 0.1
w, wt = rng.uniform(0, 1, N), rng.integers(0, 2, N)
u = rng.normal(size=N)
u /= np.linalg.norm(u)
est = stats.mc_expected_gradient(w, wt, p_e, reps=100_000, seed=1, direction=u)
exact = grad.expected_xor_grad_bernoulli(w, wt, p_e)
mean, se = est.projected
print("z of the projected gradient:", abs(mean - exact @ u) / se)
# the largest of N component z-scores is inflated by multiple comparisons
print("max component z:", np.max(np.abs(est.mean - exact) / est.stderr))

# %% Q-Q correlation separates Gaussian from skewed samples.
print("normal:", stats.qq_gaussian(rng.normal(size=5000)).correlation)
print("exponential:", stats.qq_gaussian(rng.exponential(size=5000)).correlation)

# %% Weight families stay Gaussian during a short training run.
from paritylab import experiments as ex
from paritylab.trainer import TrainConfig

cfg = TrainConfig(N=2000, M=1000, alpha=2.0, S=20_000, log_every=500)
rep = ex.run_gaussianity(ex.ExperimentConfig("g", cfg, params={"snapshots": 5}))
for r in rep.rows:
    print(f"step {r['step']:6d} qq0 {r['qq0']:.4f} qq1 {r['qq1']:.4f} mu0 {r['mu0']:+.3f} mu1 {r['mu1']:+.3f}")

"""The moment recurrence and its stability thresholds.

Run: python3 notebooks/04_dynamics_and_bounds.py
"""

# %% Learning-rate thresholds shrink relative to N as N grows small.
from paritylab import dynamics

print(",".join(dynamics.BOUNDS_HEADER))
for N in (18, 43, 100, 1000):
    print(",".join(f"{v:.5g}" for v in dynamics.bounds(N).row()))

# %% Below alpha2 the recurrence collapses into a narrow interval.
N = 100
alpha = 0.9 * dynamics.alpha2(N)
iv = dynamics.convergence_interval(N, alpha)
tr = dynamics.iterate(dynamics.INIT_STATE, alpha, N, 5000, record_every=500)
for k, mu, s2 in zip(tr.k, tr.mu, tr.sigma_sq):
    print(f"k={k:5d} mu={mu:+.5f} sigma^2={s2:.2e}")
print(f"interval [{iv.lo:.5f}, {iv.hi:.5f}] contains final mean:", tr.final.mu in iv)

# %% Forward invariance changes at three integer thresholds.
for N in (7, 8, 17, 18, 42, 43):
    r = dynamics.invariance_report(N)
    print(N, "global", r.global_containment, "interval", r.interval_containment, "relaxed", r.relaxed)

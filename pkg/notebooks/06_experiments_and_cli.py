"""Sweeps, manifests and the command-line interface.

Run: python3 notebooks/06_experiments_and_cli.py
"""

# %% Steps to convergence across sparsity, with the optimum marked.
import tempfile
from pathlib import Path

from paritylab import cli
from paritylab import experiments as ex
from paritylab.trainer import TrainConfig

base = TrainConfig(N=10, P=10, M=100, alpha=0.1, S=6000, log_every=50)
res = ex.sweep_pe(ex.ExperimentConfig("pe", base, grid=(0.05, 0.1, 0.2, 0.4, 0.7, 0.9)))
for v, s in zip(res.values, res.mean_steps()):
    print(f"p_e={v:.2f} mean steps {s:.0f}")
print("markers:", res.markers)

# %% Matched alpha * p_e gives matched convergence time.
grid = ((10, 1.0, 0.01, 1000), (10, 10.0, 0.001, 1000))
rep = ex.run_effective_lr(ex.ExperimentConfig("e", TrainConfig(N=10, P=10, S=20_000, log_every=100), grid=grid))
print("steps:", rep.steps_for(0.01), "spread:", round(rep.spread(0.01), 3))

# %% The CLI writes a CSV and a JSON manifest for every run.
out = Path(tempfile.mkdtemp())
cli.main(["bounds", "--sizes", "18", "100", "--out", str(out)])
print(sorted(p.name for p in out.iterdir()))

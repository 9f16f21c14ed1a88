"""Training a layer of XOR nodes with SGD and the MLP comparison.

Run: python3 notebooks/03_training.py
"""

# %% A sparse regime converges; the dense regime does not.
from paritylab.trainer import TrainConfig, mlp_train, train, truth_table_accuracy

for p_e in (0.1, 0.9):
    tr = train(TrainConfig(N=10, P=4, M=100, alpha=0.5, p_e=p_e, S=3000, seed=0))
    print(f"p_e={p_e}: converged at {tr.convergence_step}, final L1 {tr.l1[-1]:.4f}")

# %% The learned node reproduces the whole truth table.
tr = train(TrainConfig(N=10, P=1, M=100, alpha=0.5, p_e=0.1, S=3000, seed=0))
from paritylab.trainer import init_state

_, oracle = init_state(TrainConfig(N=10, P=1, seed=0))
print("truth-table accuracy:", truth_table_accuracy(tr.W[:, 0], oracle[:, 0]))

# %% An MLP trained on the same stream only memorises what it has seen.
res = mlp_train(TrainConfig(N=12, M=10, alpha=1.0, S=200, seed=0), arch=(128, 128, 32), lr=0.02)
print("MLP validation at 5% coverage:", res.val_at_coverage(0.05))

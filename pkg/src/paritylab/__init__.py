"""Product-node parity learning: forward models, exact derivatives, SGD
training under stochastic sparsity, and the two-moment weight dynamics."""

from paritylab import data, dynamics, grad, nodes, stats, trainer

__version__ = "0.1.0"

__all__ = ["data", "dynamics", "grad", "nodes", "stats", "trainer", "__version__"]

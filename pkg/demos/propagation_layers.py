"""
The five propagation layers
===========================

Every layer maps node features through powers of a shifted propagation
matrix. Setting the shift to zero collapses the first-order layers onto the
plain GCN rule, and two stacked linear layers fit inside one second-order
layer with separate projections.
"""

import numpy as np

from tgcn.diagnostics import fixture_graph
from tgcn.graph import build_representation
from tgcn.layers import LayerParams, LayerSpec, propagate

rng = np.random.default_rng(1)
n, f, h = 12, 5, 3
P = build_representation(fixture_graph(n, seed=1), "sym")
X = rng.standard_normal((n, f))
theta = rng.standard_normal((f, h))

# %%
# With alpha = 0 and beta = 0 the shifted layers reduce to P X Theta.
gcn = propagate(LayerSpec("gcn", f, h), LayerParams([theta]), P, X)
t1 = propagate(LayerSpec("tgcn1", f, h), LayerParams([theta], alpha=0.0), P, X)
t2 = propagate(LayerSpec("tgcn2", f, h), LayerParams([theta], beta=np.zeros(n)), P, X)
print("gcn == tgcn1(alpha=0):", np.array_equal(gcn, t1))
print("gcn == tgcn2(beta=0): ", np.array_equal(gcn, t2))

# %%
# A per-node shift lets each node weigh its own features differently.
beta = rng.uniform(0, 0.5, n)
t2b = propagate(LayerSpec("tgcn2", f, h), LayerParams([theta], beta=beta), P, X)
print("row-wise change from beta:", np.round(np.abs(t2b - gcn).sum(axis=1), 3))

# %%
# Higher orders: tgcn3 ties one projection across all powers, tgcn4 gives
# each power its own.
K = 3
t3 = propagate(LayerSpec("tgcn3", f, h, order=K), LayerParams([theta], alpha=0.2), P, X)
t4 = propagate(LayerSpec("tgcn4", f, h, order=K), LayerParams([theta] * (K + 1), alpha=0.2), P, X)
print("tgcn3 == tgcn4 with tied projections:", np.abs(t3 - t4).max())

# %%
# Two linear tgcn1 layers equal one tgcn4 layer of order 2 whose only
# nonzero projection is the product of the two.
theta2 = rng.standard_normal((h, 2))
stacked = propagate(LayerSpec("tgcn1", h, 2), LayerParams([theta2], alpha=0.3), P,
                    propagate(LayerSpec("tgcn1", f, h), LayerParams([theta], alpha=0.3), P, X))
zero = np.zeros((f, 2))
single = propagate(LayerSpec("tgcn4", f, 2, order=2), LayerParams([zero, zero, theta @ theta2], alpha=0.3), P, X)
print("stacked vs single layer:", np.abs(stacked - single).max())

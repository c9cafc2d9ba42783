"""
Choosing the propagation matrix
===============================

The same model trained with four graph matrices: raw adjacency, random
walk, the symmetric self-looped normalisation and a personalised PageRank
inverse. Spectra explain part of the difference: raw adjacency is not
bounded, so repeated products can blow up or vanish. The PageRank matrix
mixes so widely that seed hints arrive faint; on this short budget it is
still far from converged and needs several hundred epochs to catch up.
"""

import numpy as np

from tgcn.data import make_splits, sbm_dataset
from tgcn.graph import KINDS, SbmParams, build_representation
from tgcn.spectral import eigendecompose
from tgcn.training import ModelConfig, train

ds = sbm_dataset(SbmParams(n=150, blocks=3, p_in=0.3, p_out=0.03, seeds_per_block=4), seed=2)
split = make_splits(ds.n, "10/30/60", seed=2)

# %%
for kind in KINDS:
    P = build_representation(ds.graph, kind)
    dense = P.to_dense()
    lam = eigendecompose(dense).lam if P.is_symmetric() else np.linalg.eigvals(dense).real
    accs = []
    for seed in range(3):
        cfg = ModelConfig.create("tgcn1", ds.num_features, ds.num_classes, seed=seed, epochs=100)
        accs.append(train(cfg, ds, split, P=P)[1].test_acc)
    print(f"{kind:>24}: spectrum [{lam.min():7.3f}, {lam.max():7.3f}]  "
          f"test accuracy {np.mean(accs):.3f} +/- {np.std(accs):.3f}")

"""
Spectral filters and their vertex-domain twins
==============================================

A kernel applied through the eigendecomposition of a graph matrix is the
exact reference. A polynomial in the matrix reaches the same result with
repeated products only. This script checks that on a small graph and then
compares how fast Taylor and Chebyshev expansions of a heat kernel close
the gap.
"""

import numpy as np

from tgcn.diagnostics import approximation_errors, fixture_graph, laplacian
from tgcn.spectral import (
    HeatKernel,
    PolynomialCoeffs,
    eigendecompose,
    gft,
    igft,
    polynomial_filter_spectral,
    polynomial_filter_vertex,
    wavelet_apply,
)

# %%
# A 12-node cycle with a few chords, and its combinatorial Laplacian.
graph = fixture_graph(12, seed=0)
L = laplacian(graph)
basis = eigendecompose(L)
print("eigenvalues:", np.round(basis.lam, 3))

# %%
# The Fourier transform is an orthogonal change of basis, so it round-trips.
rng = np.random.default_rng(0)
x = rng.standard_normal(12)
print("round-trip error:", np.abs(igft(basis, gft(basis, x)) - x).max())

# %%
# Any polynomial kernel can be applied without the eigenvectors.
coeffs = PolynomialCoeffs([0.5, -0.3, 0.05, 0.01], center=1.0)
vertex = polynomial_filter_vertex(L, coeffs, x)
spectral = polynomial_filter_spectral(basis, coeffs, x)
print("polynomial filter, vertex vs spectral:", np.abs(vertex - spectral).max())

# %%
# The heat kernel is not a polynomial. Truncated expansions approach it as
# the order grows; Chebyshev spreads its error over [0, lambda_max] while
# Taylor is sharpest near its center.
exact = wavelet_apply(basis, HeatKernel(1.0), x)
print("heat-filtered signal norm:", np.linalg.norm(exact))
signals = rng.standard_normal((12, 4))
print(f"{'K':>3} {'taylor':>10} {'chebyshev':>10}")
for K, t_err, c_err in approximation_errors(L, HeatKernel(1.0), range(1, 11), signals):
    print(f"{K:>3} {t_err:10.2e} {c_err:10.2e}")

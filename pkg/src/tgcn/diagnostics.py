"""Batteries that check vertex-domain filters against the exact spectral oracle."""

from __future__ import annotations

import numpy as np

from .graph import Graph, build_graph
from .spectral import (
    PolynomialCoeffs,
    chebyshev_coeffs,
    eigendecompose,
    polynomial_filter_spectral,
    polynomial_filter_vertex,
    taylor_coeffs,
    wavelet_apply,
)


def laplacian(graph: Graph) -> np.ndarray:
    """Dense combinatorial Laplacian ``D - A``."""
    A = graph.adjacency.toarray()
    return np.diag(A.sum(axis=1)) - A


def fixture_graph(n: int = 12, seed: int = 0, chords: int | None = None) -> Graph:
    """Cycle on ``n`` nodes plus a few seeded chords; connected by construction."""
    rng = np.random.default_rng(seed)
    edges = [(i, (i + 1) % n) for i in range(n)]
    chords = n // 4 if chords is None else chords
    for _ in range(chords):
        u, v = rng.choice(n, size=2, replace=False)
        edges.append((int(u), int(v)))
    return build_graph(edges, n)


def random_symmetric(n: int, rng: np.random.Generator) -> np.ndarray:
    """Symmetric Gaussian matrix scaled to spectral radius about 2."""
    A = rng.standard_normal((n, n))
    return (A + A.T) / np.sqrt(2.0 * n)


def equivalence_battery(n: int, trials: int, degree: int, seed: int = 0,
                        max_n: int | None = None) -> float:
    """Largest ``|vertex - spectral|`` over random matrices, kernels and signals.

    Each trial draws a symmetric matrix (size ``n``, or uniform in
    ``[2, max_n]`` when ``max_n`` is given), a random-center Taylor-form
    polynomial of the given degree and a random signal, then filters the
    signal both by repeated products and through the eigendecomposition.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        size = int(rng.integers(2, max_n + 1)) if max_n else n
        M = random_symmetric(size, rng)
        coeffs = PolynomialCoeffs(rng.standard_normal(degree + 1), scheme="taylor",
                                  center=float(rng.uniform(-0.5, 0.5)))
        x = rng.standard_normal(size)
        basis = eigendecompose(M)
        err = np.abs(polynomial_filter_vertex(M, coeffs, x) - polynomial_filter_spectral(basis, coeffs, x))
        worst = max(worst, float(err.max()))
    return worst


def approximation_errors(M: np.ndarray, kernel, orders, signals: np.ndarray,
                         center: float | None = None) -> list[tuple[int, float, float]]:
    """Max-norm error of Taylor and Chebyshev filtering against the exact operator.

    Parameters
    ----------
    M : ndarray
        Symmetric matrix whose spectrum the kernel acts on.
    kernel : Kernel
        Must provide ``derivative`` for the Taylor coefficients.
    orders : iterable of int
    signals : ndarray, shape (n, s)
        Test signals, filtered column by column.
    center : float, optional
        Taylor expansion point; the mean eigenvalue when omitted.

    Returns
    -------
    list of (order, taylor_error, chebyshev_error)
    """
    basis = eigendecompose(M)
    exact = wavelet_apply(basis, kernel, signals)
    a = float(np.mean(basis.lam)) if center is None else center
    lmax = basis.lambda_max if basis.lambda_max > 0 else 1.0
    rows = []
    for K in orders:
        t = polynomial_filter_vertex(M, taylor_coeffs(kernel, a, K), signals)
        c = polynomial_filter_vertex(M, chebyshev_coeffs(kernel, K, lmax), signals)
        rows.append((int(K), float(np.abs(t - exact).max()), float(np.abs(c - exact).max())))
    return rows

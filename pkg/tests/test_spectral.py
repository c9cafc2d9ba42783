import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import expm_series
from tgcn.diagnostics import (
    approximation_errors,
    fixture_graph,
    laplacian,
    random_symmetric,
)
from tgcn.errors import ConfigError, NumericalError
from tgcn.graph import build_graph, build_representation
from tgcn.spectral import (
    FunctionKernel,
    HeatKernel,
    PolynomialCoeffs,
    PolynomialKernel,
    chebyshev_coeffs,
    eigendecompose,
    gft,
    igft,
    kernel_taps,
    make_kernel,
    monomial_kernel,
    polynomial_filter_spectral,
    polynomial_filter_vertex,
    shifted_linear_kernel,
    spectral_convolve,
    taylor_coeffs,
    wavelet_apply,
)

K3_ADJ = np.ones((3, 3)) - np.eye(3)
K3_LAP = 2 * np.eye(3) - (np.ones((3, 3)) - np.eye(3))


def k3_basis():
    return eigendecompose(K3_LAP)


class TestEigendecompose:
    def test_identity(self):
        b = eigendecompose(np.eye(3))
        np.testing.assert_allclose(b.lam, [1, 1, 1], atol=1e-14)
        np.testing.assert_allclose(b.V.T @ b.V, np.eye(3), atol=1e-14)

    def test_k3_adjacency_against_characteristic_roots(self):
        roots = np.sort(np.roots(np.poly(K3_ADJ)).real)
        lam = eigendecompose(K3_ADJ).lam
        np.testing.assert_allclose(lam, [-1, -1, 2], atol=1e-12)
        np.testing.assert_allclose(lam, roots, atol=1e-7)

    def test_p2_sym(self):
        P = build_representation(build_graph([(0, 1)], 2), "sym")
        b = eigendecompose(P)
        np.testing.assert_allclose(b.lam, [0.0, 1.0], atol=1e-14)
        s = 1 / math.sqrt(2)
        np.testing.assert_allclose(np.abs(b.V), np.full((2, 2), s), atol=1e-14)

    def test_ascending_and_sign_convention(self):
        b = eigendecompose(random_symmetric(20, np.random.default_rng(0)))
        assert np.all(np.diff(b.lam) >= 0)
        pivot = np.argmax(np.abs(b.V), axis=0)
        assert np.all(b.V[pivot, np.arange(20)] > 0)

    @pytest.mark.parametrize("n", [1, 2, 7, 30, 50])
    def test_matches_lapack(self, n):
        M = random_symmetric(n, np.random.default_rng(n))
        jac = eigendecompose(M)
        lap = eigendecompose(M, method="lapack")
        np.testing.assert_allclose(jac.lam, lap.lam, atol=1e-11)
        assert np.abs(jac.reconstruct() - M).max() <= 1e-11
        np.testing.assert_allclose(jac.V.T @ jac.V, np.eye(n), atol=1e-11)

    def test_sparse_input(self):
        P = build_representation(fixture_graph(12), "sym")
        b = eigendecompose(P)
        assert np.abs(b.reconstruct() - P.to_dense()).max() <= 1e-12

    def test_asymmetric_rejected(self):
        with pytest.raises(ConfigError, match="symmetric"):
            eigendecompose(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_cap(self):
        with pytest.raises(ConfigError, match="cap"):
            eigendecompose(np.eye(5), cap=4)

    def test_nonconvergence(self):
        M = random_symmetric(10, np.random.default_rng(1))
        with pytest.raises(NumericalError):
            eigendecompose(M, max_sweeps=1)

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            eigendecompose(np.eye(2), method="qr")


class TestFourier:
    def test_first_eigenvector_to_unit(self):
        b = eigendecompose(random_symmetric(6, np.random.default_rng(2)))
        e1 = np.zeros(6)
        e1[0] = 1.0
        np.testing.assert_allclose(gft(b, b.V[:, 0]), e1, atol=1e-12)

    def test_constant_on_k3_laplacian(self):
        c = 2.5
        out = gft(k3_basis(), np.full(3, c))
        np.testing.assert_allclose(np.abs(out), [c * math.sqrt(3), 0, 0], atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        b = eigendecompose(random_symmetric(8, rng))
        x = rng.normal(size=8)
        assert np.abs(igft(b, gft(b, x)) - x).max() <= 1e-12

    def test_convolution_matches_dense_form(self):
        rng = np.random.default_rng(3)
        b = eigendecompose(random_symmetric(9, rng))
        x, y = rng.normal(size=9), rng.normal(size=9)
        expected = b.V @ np.diag(b.V.T @ y) @ b.V.T @ x
        assert np.abs(spectral_convolve(b, x, y) - expected).max() <= 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            gft(k3_basis(), np.ones(4))


class TestWavelet:
    def test_unit_kernel_is_identity(self):
        x = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(wavelet_apply(k3_basis(), lambda lam: 1.0, x), x, atol=1e-14)

    def test_linear_kernel_is_matrix_product(self):
        rng = np.random.default_rng(4)
        M = random_symmetric(10, rng)
        X = rng.normal(size=(10, 3))
        got = wavelet_apply(eigendecompose(M), make_kernel("identity"), X)
        assert np.abs(got - M @ X).max() <= 1e-12

    def test_heat_matches_series(self):
        x = np.array([1.0, 0.0, 0.0])
        got = wavelet_apply(k3_basis(), HeatKernel(1.0), x)
        expected = expm_series(-K3_LAP) @ x
        assert np.abs(got - expected).max() <= 1e-8

    def test_sampled_kernel(self):
        b = k3_basis()
        x = np.arange(3.0)
        np.testing.assert_allclose(wavelet_apply(b, np.exp(-b.lam), x),
                                   wavelet_apply(b, HeatKernel(1.0), x), atol=1e-15)

    def test_sampled_kernel_wrong_length(self):
        with pytest.raises(ConfigError):
            wavelet_apply(k3_basis(), np.ones(4), np.ones(3))

    def test_nonfinite_kernel_names_eigenvalue(self):
        b = k3_basis()
        kernel = FunctionKernel(lambda lam: np.where(lam < 1.0, np.nan, lam))
        with pytest.raises(NumericalError, match="eigenvalue"):
            wavelet_apply(b, kernel, np.ones(3))

    def test_taps_of_constant_kernel(self):
        b = k3_basis()
        np.testing.assert_allclose(kernel_taps(b, lambda lam: 1.0), b.V.sum(axis=1), atol=1e-15)

    def test_taps_reproduce_spectrum(self):
        b = eigendecompose(random_symmetric(7, np.random.default_rng(5)))
        np.testing.assert_allclose(gft(b, kernel_taps(b, HeatKernel(0.3))),
                                   np.exp(-0.3 * b.lam), atol=1e-12)


class TestPolynomialFilter:
    def test_power_identity(self):
        rng = np.random.default_rng(6)
        M = random_symmetric(12, rng)
        b = eigendecompose(M)
        x = rng.normal(size=12)
        for k in range(7):
            coeffs = PolynomialCoeffs(np.eye(k + 1)[k])
            direct = np.linalg.matrix_power(M, k) @ x
            assert np.abs(polynomial_filter_vertex(M, coeffs, x) - direct).max() <= 1e-10
            assert np.abs(polynomial_filter_spectral(b, coeffs, x) - direct).max() <= 1e-10

    def test_shifted_linear_on_k3(self):
        # (P - 0.5 I) x with P = K3 adjacency
        coeffs = PolynomialCoeffs([0.0, 1.0], center=0.5)
        x = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(polynomial_filter_vertex(K3_ADJ, coeffs, x), [-0.5, 1, 1])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 30), st.integers(0, 5))
    def test_vertex_equals_spectral(self, seed, n, degree):
        rng = np.random.default_rng(seed)
        M = random_symmetric(n, rng)
        coeffs = PolynomialCoeffs(rng.normal(size=degree + 1), center=float(rng.uniform(-1, 1)))
        X = rng.normal(size=(n, 2))
        v = polynomial_filter_vertex(M, coeffs, X)
        s = polynomial_filter_spectral(eigendecompose(M), coeffs, X)
        assert np.abs(v - s).max() <= 1e-8

    def test_chebyshev_vertex_equals_spectral(self):
        rng = np.random.default_rng(7)
        M = laplacian(fixture_graph(12))
        b = eigendecompose(M)
        coeffs = PolynomialCoeffs(rng.normal(size=6), scheme="chebyshev", lambda_max=b.lambda_max)
        x = rng.normal(size=12)
        assert np.abs(polynomial_filter_vertex(M, coeffs, x)
                      - polynomial_filter_spectral(b, coeffs, x)).max() <= 1e-10

    def test_sparse_matrix_input(self):
        P = build_representation(fixture_graph(12), "sym")
        x = np.ones(12)
        coeffs = PolynomialCoeffs([1.0, 2.0, 3.0], center=0.2)
        dense = polynomial_filter_vertex(P.to_dense(), coeffs, x)
        np.testing.assert_allclose(polynomial_filter_vertex(P, coeffs, x), dense, atol=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            polynomial_filter_vertex(np.eye(3), PolynomialCoeffs([1.0]), np.ones(2))

    @pytest.mark.parametrize("kw", [
        dict(theta=[]), dict(theta=[1.0], scheme="legendre"),
        dict(theta=[1.0], scheme="chebyshev"),
    ])
    def test_bad_coeffs(self, kw):
        with pytest.raises(ConfigError):
            PolynomialCoeffs(**kw)

    def test_nonfinite_coeffs(self):
        with pytest.raises(NumericalError):
            PolynomialCoeffs([1.0, np.nan])


class TestTaylor:
    def test_exponential_at_zero(self):
        kernel = FunctionKernel(np.exp)
        theta = taylor_coeffs(HeatKernel(-1.0), 0.0, 3).theta
        np.testing.assert_allclose(theta, [1, 1, 0.5, 1 / 6], rtol=1e-14)
        # finite-difference derivatives land close to the same values
        np.testing.assert_allclose(taylor_coeffs(kernel, 0.0, 3).theta, [1, 1, 0.5, 1 / 6], rtol=1e-3)

    def test_square_about_one(self):
        np.testing.assert_allclose(taylor_coeffs(monomial_kernel(2), 1.0, 2).theta, [1, 2, 1])

    def test_lagrange_bound(self):
        coeffs = taylor_coeffs(HeatKernel(1.0), 0.5, 4)
        lam = np.linspace(0.0, 1.0, 201)
        err = np.abs(coeffs(lam) - np.exp(-lam)).max()
        assert err <= 0.5**5 / 120

    def test_exact_for_polynomials(self):
        kernel = PolynomialKernel([1.0, -2.0, 0.5, 0.25])
        lam = np.linspace(-2, 2, 9)
        np.testing.assert_allclose(taylor_coeffs(kernel, 0.7, 3)(lam), kernel(lam), atol=1e-12)

    def test_negative_order(self):
        with pytest.raises(ConfigError):
            taylor_coeffs(HeatKernel(), 0.0, -1)


class TestChebyshev:
    def test_constant(self):
        theta = chebyshev_coeffs(lambda lam: np.full_like(lam, 3.0), 3, 2.0).theta
        np.testing.assert_allclose(theta, [3, 0, 0, 0], atol=1e-14)

    def test_shifted_linear(self):
        # lam - 1 on [0, 2] is exactly T_1
        theta = chebyshev_coeffs(shifted_linear_kernel(-1.0), 2, 2.0).theta
        np.testing.assert_allclose(theta, [0, 1, 0], atol=1e-14)

    def test_heat_order_ten(self):
        b = eigendecompose(laplacian(fixture_graph(12)))
        coeffs = chebyshev_coeffs(HeatKernel(1.0), 10, b.lambda_max)
        assert np.abs(coeffs(b.lam) - np.exp(-b.lam)).max() <= 1e-6

    @pytest.mark.parametrize("lmax", [0.0, -1.0])
    def test_bad_lambda_max(self, lmax):
        with pytest.raises(ConfigError):
            chebyshev_coeffs(HeatKernel(), 2, lmax)


class TestApproximation:
    def test_heat_errors_shrink(self):
        M = laplacian(fixture_graph(12))
        signals = np.random.default_rng(0).normal(size=(12, 4))
        rows = approximation_errors(M, HeatKernel(1.0), range(1, 11), signals)
        by_order = {K: (t, c) for K, t, c in rows}
        assert by_order[5][0] < by_order[1][0]
        assert by_order[5][1] < by_order[1][1]
        assert by_order[10][1] <= 1e-6

    def test_polynomial_kernel_exact_at_its_degree(self):
        M = laplacian(fixture_graph(12))
        kernel = PolynomialKernel([0.5, -0.2, 0.03])
        rows = approximation_errors(M, kernel, [2], np.eye(12))
        assert rows[0][1] <= 1e-10 and rows[0][2] <= 1e-10


def test_make_kernel_unknown():
    with pytest.raises(ConfigError, match="known"):
        make_kernel("gabor")


def test_make_kernel_heat():
    assert make_kernel("heat", 2.0)(1.0) == pytest.approx(math.exp(-2.0))

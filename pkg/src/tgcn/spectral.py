"""Dense spectral machinery used as ground truth for vertex-domain filters.

Everything here works on explicit eigendecompositions and is meant for
graphs of a few thousand nodes at most.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, NumericalError
from .graph import PropagationMatrix

DEFAULT_CAP = 2000


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Orthonormal eigenvectors (columns of ``V``) and ascending eigenvalues."""

    V: np.ndarray
    lam: np.ndarray

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    @property
    def lambda_max(self) -> float:
        return float(self.lam[-1])

    def reconstruct(self) -> np.ndarray:
        return (self.V * self.lam) @ self.V.T


def _as_dense(M) -> np.ndarray:
    if isinstance(M, PropagationMatrix):
        return M.to_dense()
    if sp.issparse(M):
        return M.toarray()
    return np.array(M, dtype=np.float64)


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint (p, q) pairings covering every pair once per sweep."""
    players = list(range(n if n % 2 == 0 else n + 1))
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_norm(A: np.ndarray) -> float:
    off = A - np.diag(np.diag(A))
    return float(np.linalg.norm(off))


def _jacobi(A: np.ndarray, tol: float, max_sweeps: int) -> tuple[np.ndarray, np.ndarray]:
    n = A.shape[0]
    A = A.copy()
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    rounds = _round_robin(n)
    scale = max(1.0, float(np.linalg.norm(A)))
    for _ in range(max_sweeps):
        if _off_norm(A) <= tol * scale:
            return A.diagonal().copy(), V
        for p, q in rounds:
            apq = A[p, q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.where(theta < 0.0, -1.0, 1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # A <- J^T A J with J[p,p]=J[q,q]=c, J[p,q]=s, J[q,p]=-s
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap, Aq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq
    if _off_norm(A) <= tol * scale:
        return A.diagonal().copy(), V
    raise NumericalError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def eigendecompose(
    M,
    *,
    tol: float = 1e-12,
    max_sweeps: int = 100,
    cap: int = DEFAULT_CAP,
    method: str = "jacobi",
) -> SpectralBasis:
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    M : array-like, sparse matrix or PropagationMatrix
        Symmetric ``n x n`` matrix (asymmetry above 1e-10 is rejected).
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm falls below
        ``tol * max(1, ||M||_F)``.
    max_sweeps : int
        Raise :class:`NumericalError` if not converged after this many sweeps.
    cap : int
        Largest accepted ``n``.
    method : {"jacobi", "lapack"}
        ``"jacobi"`` runs cyclic Jacobi rotations in round-robin order (n/2
        disjoint rotations applied per step). ``"lapack"`` defers to
        ``numpy.linalg.eigh``.

    Returns
    -------
    SpectralBasis
        Eigenvalues ascending; each eigenvector's largest-magnitude entry is
        positive.
    """
    A = _as_dense(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n > cap:
        raise ConfigError(f"n={n} exceeds the dense eigensolver cap {cap}")
    asym = float(np.abs(A - A.T).max(initial=0.0))
    if asym > 1e-10:
        raise ConfigError(f"matrix is not symmetric (max |M - M^T| = {asym:.3g})")
    A = 0.5 * (A + A.T)

    if method == "jacobi":
        lam, V = _jacobi(A, tol, max_sweeps)
    elif method == "lapack":
        lam, V = np.linalg.eigh(A)
    else:
        raise ConfigError(f"unknown eigensolver {method!r}")

    order = np.argsort(lam, kind="stable")
    lam, V = lam[order], V[:, order]
    pivot = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[pivot, np.arange(n)])
    signs[signs == 0] = 1.0
    return SpectralBasis(V=np.ascontiguousarray(V * signs), lam=lam)


def _check_len(basis: SpectralBasis, x: np.ndarray, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != basis.n:
        raise ConfigError(f"{name} has length {x.shape[0]}, basis has {basis.n} nodes")
    return x


def gft(basis: SpectralBasis, x) -> np.ndarray:
    """Graph Fourier transform ``V^T x``."""
    return basis.V.T @ _check_len(basis, x)


def igft(basis: SpectralBasis, x_hat) -> np.ndarray:
    """Inverse graph Fourier transform ``V x_hat``."""
    return basis.V @ _check_len(basis, x_hat, "x_hat")


def spectral_convolve(basis: SpectralBasis, x, y) -> np.ndarray:
    """Graph convolution: product of the two spectra, mapped back."""
    return igft(basis, gft(basis, x) * gft(basis, y))


# -- kernels ---------------------------------------------------------------


class Kernel:
    """A spectral kernel ``g`` with optional closed-form derivatives.

    Subclasses override :meth:`derivative` when they know it; the default
    uses central finite differences.
    """

    name = "kernel"

    def __call__(self, lam):
        raise NotImplementedError

    def derivative(self, order: int, a: float) -> float:
        if order == 0:
            return float(self(np.float64(a)))
        h = 1e-2
        # central difference of the given order
        total = 0.0
        for j in range(order + 1):
            total += (-1) ** j * math.comb(order, j) * float(self(np.float64(a + (order / 2 - j) * h)))
        return total / h**order


class HeatKernel(Kernel):
    def __init__(self, t: float = 1.0):
        self.t = float(t)
        self.name = f"heat(t={self.t:g})"

    def __call__(self, lam):
        return np.exp(-self.t * np.asarray(lam, dtype=np.float64))

    def derivative(self, order, a):
        return (-self.t) ** order * math.exp(-self.t * a)


class PolynomialKernel(Kernel):
    """``g(lam) = sum_j c_j lam**j`` (coefficients in increasing powers)."""

    def __init__(self, coeffs):
        self.coeffs = np.atleast_1d(np.asarray(coeffs, dtype=np.float64))
        self.name = f"polynomial(deg={self.degree})"

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, lam):
        return np.polynomial.polynomial.polyval(np.asarray(lam, dtype=np.float64), self.coeffs)

    def derivative(self, order, a):
        d = np.polynomial.polynomial.polyder(self.coeffs, order) if order else self.coeffs
        return float(np.polynomial.polynomial.polyval(a, d))


class FunctionKernel(Kernel):
    """Wrap an arbitrary vectorized callable; derivatives by finite differences."""

    def __init__(self, fn: Callable, name: str = "user"):
        self.fn = fn
        self.name = name

    def __call__(self, lam):
        return self.fn(np.asarray(lam, dtype=np.float64))


def identity_kernel() -> PolynomialKernel:
    return PolynomialKernel([0.0, 1.0])


def shifted_linear_kernel(shift: float) -> PolynomialKernel:
    return PolynomialKernel([shift, 1.0])


def monomial_kernel(power: int) -> PolynomialKernel:
    c = np.zeros(power + 1)
    c[power] = 1.0
    return PolynomialKernel(c)


KERNELS: dict[str, Callable[..., Kernel]] = {
    "heat": HeatKernel,
    "identity": identity_kernel,
    "shifted-linear": shifted_linear_kernel,
    "monomial": monomial_kernel,
    "polynomial": PolynomialKernel,
}


def make_kernel(name: str, *args, **kwargs) -> Kernel:
    try:
        factory = KERNELS[name]
    except KeyError:
        raise ConfigError(f"unknown kernel {name!r}; known: {sorted(KERNELS)}") from None
    return factory(*args, **kwargs)


def sample_kernel(basis: SpectralBasis, kernel) -> np.ndarray:
    """Kernel values ``[g(lam_1), ..., g(lam_N)]``; a sampled array passes through."""
    if callable(kernel):
        g_hat = np.asarray(kernel(basis.lam), dtype=np.float64)
        if g_hat.shape == ():
            g_hat = np.full(basis.n, float(g_hat))
    else:
        g_hat = np.asarray(kernel, dtype=np.float64)
        if g_hat.shape != (basis.n,):
            raise ConfigError(f"sampled kernel has shape {g_hat.shape}, expected ({basis.n},)")
    bad = np.flatnonzero(~np.isfinite(g_hat))
    if bad.size:
        raise NumericalError(f"kernel is not finite at eigenvalue {basis.lam[bad[0]]!r}")
    return g_hat


def wavelet_apply(basis: SpectralBasis, kernel, x) -> np.ndarray:
    """Graph wavelet operator ``V diag(g(lam)) V^T x``.

    ``kernel`` is a callable of the eigenvalues or a sampled length-n array.
    ``x`` may be a vector or an ``n x c`` matrix.
    """
    g_hat = sample_kernel(basis, kernel)
    x = _check_len(basis, x)
    coef = basis.V.T @ x
    coef = coef * (g_hat if coef.ndim == 1 else g_hat[:, None])
    return basis.V @ coef


def kernel_taps(basis: SpectralBasis, kernel) -> np.ndarray:
    """Vertex-domain signal ``sigma`` whose spectrum equals the kernel samples."""
    return basis.V @ sample_kernel(basis, kernel)


# -- polynomial filters ----------------------------------------------------


@dataclass(frozen=True)
class PolynomialCoeffs:
    """Expansion coefficients ``theta_0..theta_K``.

    For ``scheme="taylor"`` the basis polynomials are ``(x - center)**k``.
    For ``scheme="chebyshev"`` they are ``T_k(2 x / lambda_max - 1)``.
    """

    theta: np.ndarray
    scheme: str = "taylor"
    center: float = 0.0
    lambda_max: float | None = None

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=np.float64))
        if theta.ndim != 1 or theta.size == 0:
            raise ConfigError("theta must be a non-empty vector")
        if not np.all(np.isfinite(theta)):
            raise NumericalError("non-finite expansion coefficient")
        if self.scheme not in ("taylor", "chebyshev"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "chebyshev" and not (self.lambda_max and self.lambda_max > 0):
            raise ConfigError("chebyshev coefficients need lambda_max > 0")
        object.__setattr__(self, "theta", theta)

    @property
    def order(self) -> int:
        return self.theta.size - 1

    def __call__(self, lam):
        """Evaluate the approximating polynomial at scalar or array ``lam``."""
        lam = np.asarray(lam, dtype=np.float64)
        if self.scheme == "taylor":
            return np.polynomial.polynomial.polyval(lam - self.center, self.theta)
        return np.polynomial.chebyshev.chebval(2.0 * lam / self.lambda_max - 1.0, self.theta)


def taylor_coeffs(kernel: Kernel, a: float, K: int) -> PolynomialCoeffs:
    """Taylor coefficients ``theta_k = g^(k)(a) / k!`` for ``k = 0..K``."""
    if K < 0:
        raise ConfigError(f"order K must be non-negative, got {K}")
    theta = [kernel.derivative(k, a) / math.factorial(k) for k in range(K + 1)]
    return PolynomialCoeffs(np.array(theta), scheme="taylor", center=float(a))


def chebyshev_coeffs(kernel, K: int, lambda_max: float, quad_points: int | None = None) -> PolynomialCoeffs:
    """Chebyshev coefficients of ``g`` on ``[0, lambda_max]``.

    Gauss-Chebyshev quadrature of ``(2/pi) int_0^pi cos(k t) g(lmax (cos t + 1) / 2) dt``
    with the ``k = 0`` coefficient halved, so that ``g = sum_k theta_k T_k(y)``.
    """
    if K < 0:
        raise ConfigError(f"order K must be non-negative, got {K}")
    if not lambda_max > 0:
        raise ConfigError(f"lambda_max must be positive, got {lambda_max}")
    N = quad_points or max(2 * (K + 1), 128)
    t = np.pi * (np.arange(N) + 0.5) / N
    g = np.asarray(kernel(lambda_max * (np.cos(t) + 1.0) / 2.0), dtype=np.float64)
    k = np.arange(K + 1)
    theta = (2.0 / N) * np.cos(np.outer(k, t)) @ g
    theta[0] *= 0.5
    return PolynomialCoeffs(theta, scheme="chebyshev", lambda_max=float(lambda_max))


def polynomial_filter_spectral(basis: SpectralBasis, coeffs: PolynomialCoeffs, x) -> np.ndarray:
    """Apply ``sum_r h(lam_r) f_r (f_r^T x)`` with ``h`` the coefficient polynomial."""
    return wavelet_apply(basis, coeffs(basis.lam), x)


def _matvec(P, x):
    if isinstance(P, PropagationMatrix):
        P = P.matrix
    return np.asarray(P @ x)


def polynomial_filter_vertex(P, coeffs: PolynomialCoeffs, x) -> np.ndarray:
    """Apply the coefficient polynomial of ``P`` to ``x`` by repeated products.

    Taylor: Horner accumulation of ``sum_k theta_k (P - a I)^k x``.
    Chebyshev: three-term recursion on ``P~ = 2 P / lambda_max - I``.
    No power of ``P`` is ever formed.
    """
    x = np.asarray(x, dtype=np.float64)
    n = (P.matrix if isinstance(P, PropagationMatrix) else P).shape[0]
    if x.shape[0] != n:
        raise ConfigError(f"signal length {x.shape[0]} does not match matrix size {n}")
    theta = coeffs.theta

    if coeffs.scheme == "taylor":
        a = coeffs.center
        acc = theta[-1] * x
        for th in theta[-2::-1]:
            acc = _matvec(P, acc) - a * acc + th * x
        return acc

    scale = 2.0 / coeffs.lambda_max
    t_prev = x
    out = theta[0] * t_prev
    if theta.size == 1:
        return out
    t_cur = scale * _matvec(P, x) - x
    out = out + theta[1] * t_cur
    for th in theta[2:]:
        t_next = 2.0 * (scale * _matvec(P, t_cur) - t_cur) - t_prev
        out = out + th * t_next
        t_prev, t_cur = t_cur, t_next
    return out

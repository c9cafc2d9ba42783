"""GCN and Taylor-expansion propagation layers, plus activations.

A layer maps node features ``X`` (n x in_dim) to n x out_dim:

=======  ==========================================================
gcn      ``P X Theta``
tgcn1    ``(P + alpha I) X Theta``
tgcn2    ``(P + diag(beta)) X Theta``
tgcn3    ``sum_{k=0..K} (P + alpha I)^k X Theta``
tgcn4    ``sum_{k=0..K} (P + alpha I)^k X Theta_k``
=======  ==========================================================

Powers of the shifted matrix are applied by Horner accumulation on the
n x out_dim product, one sparse multiply per order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .graph import spmm

MODELS = ("gcn", "tgcn1", "tgcn2", "tgcn3", "tgcn4")
FIRST_ORDER = ("gcn", "tgcn1", "tgcn2")
ALPHA_MODELS = ("tgcn1", "tgcn3", "tgcn4")

DEFAULT_ALPHA = 0.2


@dataclass(frozen=True)
class LayerSpec:
    model: str
    in_dim: int
    out_dim: int
    order: int = 1
    alpha_trainable: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown layer model {self.model!r}; expected one of {MODELS}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigError(f"layer dimensions must be positive, got {self.in_dim}->{self.out_dim}")
        if self.model in FIRST_ORDER and self.order != 1:
            raise ConfigError(f"{self.model} is first-order; order must be 1, got {self.order}")
        if self.model == "tgcn3" and self.order < 1:
            raise ConfigError(f"tgcn3 needs order >= 1, got {self.order}")
        if self.model == "tgcn4" and self.order < 0:
            raise ConfigError(f"tgcn4 needs order >= 0, got {self.order}")
        if self.alpha_trainable and self.model not in ALPHA_MODELS:
            raise ConfigError(f"{self.model} has no alpha parameter to train")

    @property
    def n_theta(self) -> int:
        return self.order + 1 if self.model == "tgcn4" else 1


@dataclass
class LayerParams:
    """Values of one layer: projection matrices, scalar and per-node shifts."""

    theta: list[np.ndarray]
    alpha: float | None = None
    beta: np.ndarray | None = None

    def copy(self) -> LayerParams:
        return LayerParams(
            theta=[t.copy() for t in self.theta],
            alpha=self.alpha,
            beta=None if self.beta is None else self.beta.copy(),
        )


def init_params(spec: LayerSpec, n: int, rng: np.random.Generator,
                alpha: float = DEFAULT_ALPHA) -> LayerParams:
    """Glorot-uniform projections, ``alpha`` as given, ``beta`` zero."""
    limit = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
    theta = [rng.uniform(-limit, limit, size=(spec.in_dim, spec.out_dim))
             for _ in range(spec.n_theta)]
    return LayerParams(
        theta=theta,
        alpha=float(alpha) if spec.model in ALPHA_MODELS else None,
        beta=np.zeros(n) if spec.model == "tgcn2" else None,
    )


def check_params(spec: LayerSpec, params: LayerParams, n: int) -> None:
    if len(params.theta) != spec.n_theta:
        raise ConfigError(f"{spec.model} expects {spec.n_theta} projection matrices, got {len(params.theta)}")
    for k, th in enumerate(params.theta):
        if th.shape != (spec.in_dim, spec.out_dim):
            raise ConfigError(f"theta[{k}] has shape {th.shape}, expected {(spec.in_dim, spec.out_dim)}")
        if not np.all(np.isfinite(th)):
            raise NumericalError(f"theta[{k}] has non-finite entries")
    if spec.model in ALPHA_MODELS:
        if params.alpha is None or not np.isfinite(params.alpha):
            raise NumericalError(f"{spec.model} needs a finite alpha, got {params.alpha}")
    if spec.model == "tgcn2":
        if params.beta is None or params.beta.shape != (n,):
            raise ConfigError(f"tgcn2 needs beta of shape ({n},)")
        if not np.all(np.isfinite(params.beta)):
            raise NumericalError("beta has non-finite entries")


def _shift(spec: LayerSpec, params: LayerParams):
    if spec.model in ALPHA_MODELS:
        return params.alpha
    if spec.model == "tgcn2":
        return params.beta
    return None


def _shifted_mul(P, shift, Y: np.ndarray) -> np.ndarray:
    """``(P + diag(shift)) Y`` without forming the shifted matrix."""
    out = spmm(P, Y)
    if shift is None:
        return out
    if np.ndim(shift) == 0:
        return out + shift * Y
    return out + shift[:, None] * Y


@dataclass
class LayerCache:
    X: np.ndarray
    terms: list  # T_0..T_K, entries may be None
    stack: list = field(default_factory=list)  # Horner inputs, k = K-1 .. 0


def _terms(spec: LayerSpec, params: LayerParams, X: np.ndarray) -> list:
    K = spec.order
    if spec.model in FIRST_ORDER:
        return [None, X @ params.theta[0]]
    if spec.model == "tgcn3":
        H = X @ params.theta[0]
        return [H] * (K + 1)
    return [X @ th for th in params.theta]


def propagate_with_cache(spec: LayerSpec, params: LayerParams, P, X: np.ndarray):
    """Forward pass returning ``(output, cache)`` for :func:`propagate_backward`."""
    X = np.asarray(X, dtype=np.float64)
    n = P.shape[0]
    if X.shape != (n, spec.in_dim):
        raise ConfigError(f"input has shape {X.shape}, expected {(n, spec.in_dim)}")
    check_params(spec, params, n)
    shift = _shift(spec, params)
    terms = _terms(spec, params, X)
    cache = LayerCache(X=X, terms=terms)
    acc = terms[-1]
    for k in range(len(terms) - 2, -1, -1):
        cache.stack.append(acc)
        acc = _shifted_mul(P, shift, acc)
        if terms[k] is not None:
            acc = acc + terms[k]
    return acc, cache


def propagate(spec: LayerSpec, params: LayerParams, P, X: np.ndarray) -> np.ndarray:
    """Apply one propagation layer to ``X``."""
    return propagate_with_cache(spec, params, P, X)[0]


def propagate_backward(spec: LayerSpec, params: LayerParams, PT, cache: LayerCache,
                       grad_out: np.ndarray, need_input_grad: bool = True):
    """Reverse pass of :func:`propagate`.

    ``PT`` is the transpose of the matrix used forward (the same object for
    symmetric kinds). Returns ``(grads, grad_input)`` where ``grads`` is a
    :class:`LayerParams` of gradients (``alpha``/``beta`` slots filled for the
    models that have them) and ``grad_input`` is ``None`` unless requested.
    """
    shift = _shift(spec, params)
    K = len(cache.terms) - 1
    d_terms = [None] * (K + 1)
    d_alpha = 0.0
    d_beta = np.zeros(PT.shape[0]) if spec.model == "tgcn2" else None

    g = grad_out
    for k in range(K):
        if cache.terms[k] is not None:
            d_terms[k] = g
        a = cache.stack[K - 1 - k]
        if spec.model in ALPHA_MODELS:
            d_alpha += float(np.sum(g * a))
        elif d_beta is not None:
            d_beta += np.sum(g * a, axis=1)
        g = _shifted_mul(PT, shift, g)
    d_terms[K] = g

    X = cache.X
    if spec.model == "tgcn4":
        d_theta = [X.T @ dt for dt in d_terms]
        d_input = sum(dt @ th.T for dt, th in zip(d_terms, params.theta)) if need_input_grad else None
    else:
        dH = d_terms[K]
        for dt in d_terms[:K]:
            if dt is not None:
                dH = dH + dt
        d_theta = [X.T @ dH]
        d_input = dH @ params.theta[0].T if need_input_grad else None

    grads = LayerParams(
        theta=d_theta,
        alpha=d_alpha if spec.model in ALPHA_MODELS else None,
        beta=d_beta,
    )
    return grads, d_input


# -- activations -----------------------------------------------------------


def relu(X: np.ndarray) -> np.ndarray:
    return np.maximum(X, 0.0)


def softmax_rows(X: np.ndarray) -> np.ndarray:
    """Row-wise softmax with the row maximum subtracted first."""
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise NumericalError("softmax input has non-finite entries")
    e = np.exp(X - X.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout multiplier: 0 with probability ``rate``, else ``1/(1-rate)``."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def dropout(X: np.ndarray, rate: float, rng: np.random.Generator | None, training: bool) -> np.ndarray:
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return X
    return X * dropout_mask(X.shape, rate, rng)


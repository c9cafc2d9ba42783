"""Model assembly, masked cross-entropy, hand-written gradients, Adam, training loops."""

from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass, field, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .data import Dataset, SplitSpec
from .errors import ConfigError, NumericalError
from .graph import PropagationMatrix, build_representation
from .layers import (
    ALPHA_MODELS,
    DEFAULT_ALPHA,
    FIRST_ORDER,
    LayerParams,
    LayerSpec,
    dropout_mask,
    init_params,
    propagate_backward,
    propagate_with_cache,
    relu,
    softmax_rows,
)

CLAMP = 1e-12


@dataclass
class ModelConfig:
    """Architecture and optimisation settings.

    Defaults are the hyperparameters used for the citation experiments:
    40 hidden units, dropout 0.5, learning rate 0.01, weight decay 5e-4 on the
    first layer, 200 epochs.
    """

    layer_specs: list[LayerSpec]
    hidden: int = 40
    dropout: float = 0.5
    lr: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 200
    seed: int = 0
    determinism: bool = False
    alpha_init: float = DEFAULT_ALPHA

    @classmethod
    def create(cls, model: str, in_dim: int, num_classes: int, *, layers: int = 2,
               order: int = 1, hidden: int = 40, alpha_trainable: bool | None = None,
               **kwargs) -> ModelConfig:
        """Stack ``layers`` layers of one model type: in_dim -> hidden -> ... -> classes.

        ``alpha_trainable`` defaults to True for the higher-order models and
        False for tgcn1 (manual alpha).
        """
        if layers < 1:
            raise ConfigError(f"need at least one layer, got {layers}")
        if model in FIRST_ORDER and order != 1:
            raise ConfigError(f"--order {order} is not valid for first-order model {model}")
        if alpha_trainable is None:
            alpha_trainable = model in ("tgcn3", "tgcn4")
        if model not in ALPHA_MODELS:
            alpha_trainable = False
        dims = [in_dim] + [hidden] * (layers - 1) + [num_classes]
        specs = [LayerSpec(model, dims[i], dims[i + 1], order=order, alpha_trainable=alpha_trainable)
                 for i in range(layers)]
        return cls(layer_specs=specs, hidden=hidden, **kwargs)

    def validate(self) -> None:
        if not self.layer_specs:
            raise ConfigError("model has no layers")
        for a, b in zip(self.layer_specs, self.layer_specs[1:]):
            if a.out_dim != b.in_dim:
                raise ConfigError(f"layer widths do not chain: {a.out_dim} -> {b.in_dim}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")


@dataclass
class Model:
    specs: list[LayerSpec]
    params: list[LayerParams]

    @classmethod
    def init(cls, config: ModelConfig, n: int, rng: np.random.Generator) -> Model:
        config.validate()
        return cls(list(config.layer_specs),
                   [init_params(s, n, rng, alpha=config.alpha_init) for s in config.layer_specs])

    def copy(self) -> Model:
        return Model(list(self.specs), [p.copy() for p in self.params])


# -- flat parameter view ----------------------------------------------------


def named_parameters(model: Model) -> list[tuple[str, np.ndarray]]:
    """Trainable arrays in fixed (layer index, name) order.

    ``alpha`` appears as a 0-d array. The returned arrays are copies.
    """
    out = []
    for i, (spec, p) in enumerate(zip(model.specs, model.params)):
        for k, th in enumerate(p.theta):
            out.append((f"layer{i}.theta{k}", th.copy()))
        if spec.model in ALPHA_MODELS and spec.alpha_trainable:
            out.append((f"layer{i}.alpha", np.array(p.alpha)))
        if spec.model == "tgcn2":
            out.append((f"layer{i}.beta", p.beta.copy()))
    return out


def named_gradients(model: Model, grads: list[LayerParams]) -> dict[str, np.ndarray]:
    out = {}
    for i, (spec, g) in enumerate(zip(model.specs, grads)):
        for k, th in enumerate(g.theta):
            out[f"layer{i}.theta{k}"] = th
        if spec.model in ALPHA_MODELS and spec.alpha_trainable:
            out[f"layer{i}.alpha"] = np.array(g.alpha)
        if spec.model == "tgcn2":
            out[f"layer{i}.beta"] = g.beta
    return out


def set_parameters(model: Model, values: dict[str, np.ndarray]) -> Model:
    """Return a copy of ``model`` with the named arrays replaced."""
    new = model.copy()
    for name, value in values.items():
        layer, slot = name.split(".")
        p = new.params[int(layer[5:])]
        if slot.startswith("theta"):
            p.theta[int(slot[5:])] = np.array(value, dtype=np.float64)
        elif slot == "alpha":
            p.alpha = float(value)
        elif slot == "beta":
            p.beta = np.array(value, dtype=np.float64)
        else:
            raise KeyError(name)
    return new


def decayed_names(model: Model) -> list[str]:
    """Weight decay applies to the first layer's projections only."""
    return [f"layer0.theta{k}" for k in range(len(model.params[0].theta))]


# -- forward / loss / backward ------------------------------------------------


@dataclass
class ForwardCache:
    masks: list
    layer_caches: list = field(default_factory=list)
    pre_activations: list = field(default_factory=list)
    Z: np.ndarray | None = None


def sample_masks(model: Model, n: int, rate: float, rng: np.random.Generator) -> list:
    return [dropout_mask((n, s.in_dim), rate, rng) for s in model.specs]


def forward(model: Model, P, X: np.ndarray, *, training: bool = False, rng=None,
            dropout: float = 0.0, masks=None) -> tuple[np.ndarray, ForwardCache]:
    """Class probabilities ``Z`` for every node, plus the cache for backward.

    Per layer: [dropout ->] propagate, with ReLU between layers and a row
    softmax at the end. In training mode dropout masks are sampled from
    ``rng`` unless ``masks`` is given; evaluation mode uses no dropout.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != model.specs[0].in_dim:
        raise ConfigError(f"features have width {X.shape[1]}, first layer expects {model.specs[0].in_dim}")
    if training and masks is None and dropout > 0.0:
        masks = sample_masks(model, X.shape[0], dropout, rng)
    if not training:
        masks = None
    cache = ForwardCache(masks=masks if masks is not None else [None] * len(model.specs))

    h = X
    last = len(model.specs) - 1
    for i, (spec, params) in enumerate(zip(model.specs, model.params)):
        mask = cache.masks[i]
        inp = h * mask if mask is not None else h
        out, lc = propagate_with_cache(spec, params, P, inp)
        cache.layer_caches.append(lc)
        cache.pre_activations.append(out)
        h = relu(out) if i < last else out
    Z = softmax_rows(h)
    cache.Z = Z
    return Z, cache


def cross_entropy(Z: np.ndarray, Y: np.ndarray, labeled) -> float:
    """Summed cross-entropy ``-sum_{i in labeled} sum_j Y_ij ln Z_ij``.

    Repeated indices in ``labeled`` count once per occurrence.
    """
    labeled = np.asarray(labeled, dtype=np.int64)
    if labeled.size == 0:
        raise ConfigError("labeled set is empty")
    Zl = np.maximum(Z[labeled], CLAMP)
    return float(-np.sum(Y[labeled] * np.log(Zl)))


def weight_penalty(model: Model, weight_decay: float) -> float:
    return 0.5 * weight_decay * sum(float(np.sum(t * t)) for t in model.params[0].theta)


def objective(model: Model, P, X, Y, labeled, weight_decay: float = 0.0, masks=None) -> float:
    """Training objective: summed cross-entropy plus first-layer L2 penalty."""
    Z, _ = forward(model, P, X, training=masks is not None, masks=masks)
    return cross_entropy(Z, Y, labeled) + weight_penalty(model, weight_decay)


def backward(model: Model, P, X, Y, labeled, cache: ForwardCache | None, PT=None) -> list[LayerParams]:
    """Gradients of :func:`cross_entropy` w.r.t. every layer's parameters.

    ``cache`` must come from :func:`forward` on the same inputs; dropout masks
    stored there are reused. ``PT`` is the transpose of ``P`` (defaults to
    ``P.T`` when ``P`` is not symmetric).
    """
    if cache is None or cache.Z is None:
        raise ConfigError("backward needs the cache of a forward pass")
    if PT is None:
        pm = P if isinstance(P, PropagationMatrix) else PropagationMatrix.from_matrix(P)
        PT = pm if pm.is_symmetric() else pm.T
    labeled = np.asarray(labeled, dtype=np.int64)
    if labeled.size == 0:
        raise ConfigError("labeled set is empty")

    Zl, Yl = cache.Z[labeled], Y[labeled]
    # entries below the clamp contribute a constant to the loss
    live = np.where(Zl >= CLAMP, Yl, 0.0)
    g = np.zeros_like(cache.Z)
    np.add.at(g, labeled, live.sum(axis=1, keepdims=True) * Zl - live)

    grads = [None] * len(model.specs)
    for i in range(len(model.specs) - 1, -1, -1):
        if i < len(model.specs) - 1:
            g = g * (cache.pre_activations[i] > 0)
        layer_grads, g_in = propagate_backward(model.specs[i], model.params[i], PT,
                                               cache.layer_caches[i], g, need_input_grad=i > 0)
        grads[i] = layer_grads
        if i > 0 and cache.masks[i] is not None:
            g_in = g_in * cache.masks[i]
        g = g_in
    return grads


# -- optimiser ----------------------------------------------------------------


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              lr: float, weight_decay: float = 0.0, decayed=()) -> dict[str, np.ndarray]:
    """One bias-corrected Adam update; returns new parameter arrays.

    Weight decay is coupled: ``weight_decay * p`` is added to the gradient
    of each parameter named in ``decayed`` before the moment updates.
    """
    state.t += 1
    decayed = set(decayed)
    out = {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != np.shape(p):
            raise ConfigError(f"gradient for {name} has shape {g.shape}, parameter {np.shape(p)}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {name}")
        if name in decayed and weight_decay:
            g = g + weight_decay * p
        m = state.m.get(name, np.zeros_like(g))
        v = state.v.get(name, np.zeros_like(g))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1.0 - state.beta1 ** state.t)
        v_hat = v / (1.0 - state.beta2 ** state.t)
        out[name] = p - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out


# -- loops ----------------------------------------------------------------------


@dataclass
class Metrics:
    loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    ms: list[float] = field(default_factory=list)
    test_acc: float = float("nan")

    def epochs_as_dicts(self) -> list[dict]:
        return [
            {"loss": l, "train_acc": a, "val_acc": v, "ms": t}
            for l, a, v, t in zip(self.loss, self.train_acc, self.val_acc, self.ms)
        ]


def accuracy(Z: np.ndarray, labels: np.ndarray, index) -> float:
    """Fraction of ``index`` whose row argmax (lowest class on ties) matches."""
    index = np.asarray(index, dtype=np.int64)
    if index.size == 0:
        return float("nan")
    return float(np.mean(np.argmax(Z[index], axis=1) == labels[index]))


def predict(model: Model, P, X) -> np.ndarray:
    return forward(model, P, X, training=False)[0]


def evaluate(model: Model, dataset: Dataset, index, P) -> float:
    return accuracy(predict(model, P, dataset.features), dataset.labels, index)


def _transpose(P: PropagationMatrix) -> PropagationMatrix:
    return P if P.is_symmetric() else P.T


def train(config: ModelConfig, dataset: Dataset, split: SplitSpec, kind: str = "sym",
          P: PropagationMatrix | None = None) -> tuple[Model, Metrics]:
    """Full-graph training for exactly ``config.epochs`` Adam steps.

    Initial weights and dropout masks come from ``default_rng(config.seed)``.
    With ``config.determinism`` set, BLAS runs single-threaded for the
    duration of the call.
    """
    config.validate()
    split.validate(dataset.n)
    if P is None:
        P = build_representation(dataset.graph, kind)
    PT = _transpose(P)
    X = dataset.features
    Y = dataset.one_hot()
    rng = np.random.default_rng(config.seed)
    model = Model.init(config, dataset.n, rng)
    state = AdamState()
    metrics = Metrics()
    decayed = decayed_names(model)

    limits = threadpool_limits(1) if config.determinism else contextlib.nullcontext()
    with limits:
        for _ in range(config.epochs):
            t0 = time.perf_counter()
            Z, cache = forward(model, P, X, training=True, rng=rng, dropout=config.dropout)
            loss = cross_entropy(Z, Y, split.train) + weight_penalty(model, config.weight_decay)
            if not np.isfinite(loss):
                raise NumericalError(f"training loss became non-finite ({loss})")
            grads = backward(model, P, X, Y, split.train, cache, PT=PT)
            params = dict(named_parameters(model))
            updated = adam_step(state, params, named_gradients(model, grads), config.lr,
                                config.weight_decay, decayed)
            model = set_parameters(model, updated)
            elapsed = (time.perf_counter() - t0) * 1e3

            Z_eval = predict(model, P, X)
            metrics.loss.append(loss)
            metrics.train_acc.append(accuracy(Z_eval, dataset.labels, split.train))
            metrics.val_acc.append(accuracy(Z_eval, dataset.labels, split.val))
            metrics.ms.append(elapsed)
        metrics.test_acc = evaluate(model, dataset, split.test, P)
    return model, metrics


def alpha_sweep(config: ModelConfig, dataset: Dataset, split: SplitSpec, grid, seeds=(0,),
                kind: str = "sym", P: PropagationMatrix | None = None) -> list[tuple[float, float, float]]:
    """Validation accuracy of a fixed-alpha tgcn1 model over a grid of alphas.

    Returns ``(alpha, mean, std)`` rows in grid order; each entry averages the
    final-epoch validation accuracy over ``seeds``.
    """
    grid = list(grid)
    if not grid:
        raise ConfigError("alpha grid is empty")
    if any(s.model != "tgcn1" or s.alpha_trainable for s in config.layer_specs):
        raise ConfigError("alpha sweep needs tgcn1 layers with a fixed alpha")
    if P is None:
        P = build_representation(dataset.graph, kind)
    rows = []
    for alpha in grid:
        accs = []
        for seed in seeds:
            cfg = replace(config, seed=int(seed), alpha_init=float(alpha))
            _, m = train(cfg, dataset, split, P=P)
            accs.append(m.val_acc[-1] if m.val_acc else float("nan"))
        rows.append((float(alpha), float(np.mean(accs)), float(np.std(accs))))
    return rows


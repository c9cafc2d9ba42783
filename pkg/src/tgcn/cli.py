"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data, diagnostics, spectral
from .errors import ConfigError, DataError, NumericalError, TGCNError
from .graph import SbmParams, build_representation, resolve_kind
from .layers import FIRST_ORDER, LayerParams, LayerSpec
from .training import Model, ModelConfig, alpha_sweep, evaluate, train

SCHEMA_VERSION = 1

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

METRICS_SCHEMA = {
    "type": "object",
    "required": ["schema", "config", "runs", "aggregate"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "config": {"type": "object"},
        "seeds": {"type": "array", "items": {"type": "integer"}},
        "runs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["seed", "epochs", "test_acc"],
                "properties": {
                    "seed": {"type": "integer"},
                    "epochs": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["loss", "train_acc", "val_acc", "ms"],
                            "properties": {
                                "loss": {"type": "number"},
                                "train_acc": {"type": "number", "minimum": 0, "maximum": 1},
                                "val_acc": {"type": ["number", "null"]},
                                "ms": {"type": "number"},
                            },
                        },
                    },
                    "test_acc": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                },
            },
        },
        "aggregate": {
            "type": "object",
            "required": ["mean", "std"],
            "properties": {"mean": {"type": ["number", "null"]}, "std": {"type": ["number", "null"]}},
        },
        "wall_clock_s": {"type": "number"},
    },
}


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    """``a,b,c`` or an inclusive range ``start:stop:step``."""
    try:
        if ":" in text:
            start, stop, step = (float(s) for s in text.split(":"))
            count = int(round((stop - start) / step)) + 1
            return [round(start + i * step, 12) for i in range(count)]
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _orders(text: str) -> list[int]:
    if "-" in text:
        lo, hi = (int(s) for s in text.split("-"))
        return list(range(lo, hi + 1))
    return _int_list(text)


def _nan_to_none(x: float):
    return None if x != x else x


# -- shared model flags --------------------------------------------------------


def _add_model_flags(p: argparse.ArgumentParser, default_model: str = "tgcn2") -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--dataset", help="dataset directory")
    src.add_argument("--points", help="point-cloud file ('x y z label' lines)")
    p.add_argument("--knn", type=int, default=20, help="k for the point-cloud graph")
    p.add_argument("--model", choices=["gcn", "tgcn1", "tgcn2", "tgcn3", "tgcn4"], default=default_model)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--prop", choices=["adj", "rw", "sym", "ppr"], default="sym")
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--auto-alpha", action="store_true", help="train alpha (tgcn1)")
    p.add_argument("--hidden", type=int, default=40)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--split", default=None,
                   help="ratio tag (10/30/60, 60/20/20, 70/15/15, 70/0/30); default: splits.json if present, "
                        "else 10/30/60 for datasets and 70/0/30 for point clouds")
    p.add_argument("--split-seed", type=int, default=None,
                   help="fix one split for all seeds (default: a fresh split per seed)")
    norm = p.add_mutually_exclusive_group()
    norm.add_argument("--normalize", dest="normalize", action="store_true", default=None)
    norm.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.add_argument("--deterministic", action="store_true")


def _load_source(args) -> data.Dataset:
    if args.dataset:
        if not Path(args.dataset).is_dir():
            raise DataError(f"dataset directory {args.dataset} not found")
        ds = data.load_dataset(args.dataset)
        normalize = True if args.normalize is None else args.normalize
    else:
        points, labels = data.load_point_cloud(args.points)
        ds = data.point_cloud_dataset(points, labels, k=args.knn, name=Path(args.points).stem)
        normalize = bool(args.normalize)
    if normalize:
        ds.features = data.row_normalize_features(ds.features)
    return ds


def _config_echo(args) -> dict:
    keys = ["dataset", "points", "knn", "model", "order", "prop", "alpha", "auto_alpha", "hidden",
            "epochs", "lr", "dropout", "weight_decay", "layers", "split", "split_seed", "normalize",
            "deterministic"]
    return {k: getattr(args, k, None) for k in keys}


def _resolve_model_args(args) -> None:
    if args.model in FIRST_ORDER:
        if args.order not in (None, 1):
            raise ConfigError(f"--order {args.order} given for first-order model {args.model}")
        args.order = 1
    elif args.order is None:
        args.order = 2
    if args.auto_alpha and args.model != "tgcn1":
        raise ConfigError("--auto-alpha only applies to tgcn1")
    if args.layers < 1:
        raise ConfigError("--layers must be at least 1")
    if not 0.0 <= args.dropout < 1.0:
        raise ConfigError("--dropout must lie in [0, 1)")
    if not args.seeds:
        raise ConfigError("--seeds is empty")


def _base_config(args, ds: data.Dataset) -> ModelConfig:
    return ModelConfig.create(
        args.model, ds.num_features, ds.num_classes,
        layers=args.layers, order=args.order, hidden=args.hidden,
        alpha_trainable=args.auto_alpha if args.model == "tgcn1" else None,
        dropout=args.dropout, lr=args.lr, weight_decay=args.weight_decay,
        epochs=args.epochs, determinism=args.deterministic, alpha_init=args.alpha,
    )


def _split_for(args, ds: data.Dataset, seed: int) -> data.SplitSpec:
    if args.split is None and args.dataset:
        file_split = data.load_splits(args.dataset)
        if file_split is not None:
            return file_split
    tag = args.split or ("10/30/60" if args.dataset else "70/0/30")
    split_seed = seed if args.split_seed is None else args.split_seed
    return data.make_splits(ds.n, tag, split_seed)


def _workers(n_jobs: int, deterministic: bool) -> int:
    if deterministic:
        return 1
    try:
        cap = int(os.environ.get("TGCN_THREADS", "1"))
    except ValueError:
        raise ConfigError("TGCN_THREADS must be an integer") from None
    return max(1, min(cap, n_jobs))


def _map(fn, items, workers: int) -> list:
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- model files -----------------------------------------------------------------


def save_model(path, model: Model, meta: dict) -> None:
    arrays = {}
    for i, p in enumerate(model.params):
        for k, th in enumerate(p.theta):
            arrays[f"layer{i}.theta{k}"] = th
        if p.alpha is not None:
            arrays[f"layer{i}.alpha"] = np.array(p.alpha)
        if p.beta is not None:
            arrays[f"layer{i}.beta"] = p.beta
    doc = dict(meta, specs=[vars(s) for s in model.specs])
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(doc)), **arrays)


def load_model(path) -> tuple[Model, dict]:
    try:
        with np.load(path) as z:
            doc = json.loads(str(z["__meta__"]))
            arrays = {k: z[k] for k in z.files if k != "__meta__"}
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    specs = [LayerSpec(**s) for s in doc.pop("specs")]
    params = []
    for i, s in enumerate(specs):
        alpha = arrays.get(f"layer{i}.alpha")
        params.append(LayerParams(
            theta=[arrays[f"layer{i}.theta{k}"] for k in range(s.n_theta)],
            alpha=None if alpha is None else float(alpha),
            beta=arrays.get(f"layer{i}.beta"),
        ))
    return Model(specs, params), doc


# -- commands --------------------------------------------------------------------


def cmd_train(args) -> int:
    _resolve_model_args(args)
    ds = _load_source(args)
    kind = resolve_kind(args.prop)
    P = build_representation(ds.graph, kind)
    config = _base_config(args, ds)
    started = time.perf_counter()

    def run(seed):
        split = _split_for(args, ds, seed)
        model, metrics = train(replace(config, seed=seed), ds, split, P=P)
        return seed, split, model, metrics

    results = _map(run, args.seeds, _workers(len(args.seeds), args.deterministic))
    accs = [m.test_acc for _, _, _, m in results]
    record = {
        "schema": SCHEMA_VERSION,
        "config": _config_echo(args),
        "seeds": list(args.seeds),
        "runs": [
            {"seed": seed,
             "epochs": [{k: _nan_to_none(v) for k, v in e.items()} for e in m.epochs_as_dicts()],
             "test_acc": _nan_to_none(m.test_acc)}
            for seed, _, _, m in results
        ],
        "aggregate": {"mean": _nan_to_none(float(np.mean(accs))), "std": _nan_to_none(float(np.std(accs)))},
        "wall_clock_s": time.perf_counter() - started,
    }
    for seed, split, model, _ in results:
        if args.save_params:
            meta = {"prop": kind, "split": split.tag, "split_seed": split.seed, "seed": seed,
                    "normalize": args.normalize, "knn": args.knn}
            save_model(f"{args.save_params}.seed{seed}.npz", model, meta)
    text = json.dumps(record, indent=2, allow_nan=False) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(f"test accuracy {np.mean(accs):.4f} +/- {np.std(accs):.4f} over {len(accs)} seed(s)")
    return EXIT_OK


def cmd_eval(args) -> int:
    model, meta = load_model(args.params)
    args.points = None
    if args.normalize is None:
        args.normalize = meta.get("normalize")
    ds = _load_source(args)
    if ds.num_features != model.specs[0].in_dim:
        raise DataError(f"dataset has {ds.num_features} features, model expects {model.specs[0].in_dim}")
    file_split = data.load_splits(args.dataset) if meta.get("split") == "file" else None
    split = file_split or data.make_splits(ds.n, meta["split"], meta["split_seed"])
    P = build_representation(ds.graph, meta["prop"])
    acc = evaluate(model, ds, getattr(split, args.on), P)
    print(json.dumps({"split": args.on, "accuracy": _nan_to_none(acc)}))
    return EXIT_OK


def cmd_sweep_alpha(args) -> int:
    args.model = "tgcn1"
    _resolve_model_args(args)
    if args.auto_alpha:
        raise ConfigError("alpha sweep uses fixed alphas; drop --auto-alpha")
    ds = _load_source(args)
    P = build_representation(ds.graph, resolve_kind(args.prop))
    config = _base_config(args, ds)

    def point(alpha):
        # one split per seed, shared across grid points
        accs = []
        for seed in args.seeds:
            split = _split_for(args, ds, seed)
            row = alpha_sweep(replace(config, seed=seed), ds, split, [alpha], seeds=[seed], P=P)
            accs.append(row[0][1])
        return alpha, float(np.mean(accs)), float(np.std(accs))

    rows = _map(point, args.grid, _workers(len(args.grid), args.deterministic))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["alpha", "mean", "std"])
        for alpha, mean, std in rows:
            w.writerow([repr(alpha), repr(mean), repr(std)])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_gen_sbm(args) -> int:
    params = SbmParams(n=args.n, blocks=args.blocks, p_in=args.p_in, p_out=args.p_out,
                       seeds_per_block=args.seeds_per_block)
    ds = data.sbm_dataset(params, args.seed, name=args.name)
    data.save_dataset(ds, args.out)
    if args.split:
        data.save_splits(data.make_splits(ds.n, args.split, args.seed), args.out)
    print(f"wrote {args.out}: n={ds.n} edges={ds.graph.num_edges} "
          f"components={ds.graph.connected_components()}")
    return EXIT_OK


def cmd_spectral_check(args) -> int:
    if args.n < 1 or args.n > args.cap:
        raise ConfigError(f"--n must lie in [1, {args.cap}], got {args.n}")
    if args.degree < 0 or args.trials < 1:
        raise ConfigError("--degree must be >= 0 and --trials >= 1")
    err = diagnostics.equivalence_battery(args.n, args.trials, args.degree, args.seed)
    ok = err <= args.tol
    print(f"n={args.n} trials={args.trials} degree={args.degree} max_error={err:.3e} "
          f"{'PASS' if ok else 'FAIL'} (tol {args.tol:g})")
    return EXIT_OK if ok else EXIT_NUMERIC


def _kernel_from_args(args) -> spectral.Kernel:
    if args.kernel == "heat":
        return spectral.make_kernel("heat", args.param if args.param is not None else 1.0)
    if args.kernel == "identity":
        return spectral.make_kernel("identity")
    if args.kernel == "shifted-linear":
        return spectral.make_kernel("shifted-linear", args.param if args.param is not None else 0.0)
    if args.kernel == "monomial":
        return spectral.make_kernel("monomial", int(args.param if args.param is not None else 2))
    if args.kernel == "polynomial":
        if not args.coeffs:
            raise ConfigError("--kernel polynomial needs --coeffs")
        return spectral.make_kernel("polynomial", args.coeffs)
    return spectral.make_kernel(args.kernel)


def cmd_approx_compare(args) -> int:
    kernel = _kernel_from_args(args)
    if args.n < 3:
        raise ConfigError("--n must be at least 3")
    if any(k < 0 for k in args.orders):
        raise ConfigError("--orders must be non-negative")
    L = diagnostics.laplacian(diagnostics.fixture_graph(args.n, args.seed))
    signals = np.random.default_rng(args.seed).standard_normal((args.n, args.signals))
    rows = diagnostics.approximation_errors(L, kernel, args.orders, signals)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["order", "taylor_error", "chebyshev_error"])
    for K, t, c in rows:
        w.writerow([K, f"{t:.6e}", f"{c:.6e}"])
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tgcn", description="Taylor-expansion graph convolution workbench")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model per seed and write a metrics JSON")
    _add_model_flags(p)
    p.add_argument("--out", help="metrics JSON path")
    p.add_argument("--save-params", help="prefix for per-seed .npz model files")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy of a saved model on one split")
    p.add_argument("--params", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--on", choices=["train", "val", "test"], default="test")
    norm = p.add_mutually_exclusive_group()
    norm.add_argument("--normalize", dest="normalize", action="store_true", default=None)
    norm.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-alpha", help="validation accuracy of tgcn1 over fixed alphas")
    _add_model_flags(p, default_model="tgcn1")
    p.add_argument("--grid", type=_float_list, default=_float_list("0:0.5:0.05"),
                   help="comma list or start:stop:step (inclusive)")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep_alpha)

    p = sub.add_parser("gen-sbm", help="write a stochastic-block-model dataset directory")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--p-in", type=float, default=0.9)
    p.add_argument("--p-out", type=float, default=0.05)
    p.add_argument("--seeds-per-block", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="sbm")
    p.add_argument("--split", help="also write splits.json with this ratio tag")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_sbm)

    p = sub.add_parser("spectral-check", help="vertex vs spectral polynomial filter battery")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--degree", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=spectral.DEFAULT_CAP)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_spectral_check)

    p = sub.add_parser("approx-compare", help="Taylor vs Chebyshev kernel approximation errors (CSV)")
    p.add_argument("--kernel", default="heat")
    p.add_argument("--param", type=float, default=None,
                   help="heat time t, linear shift, or monomial power")
    p.add_argument("--coeffs", type=_float_list, default=None,
                   help="polynomial kernel coefficients, increasing powers")
    p.add_argument("--orders", type=_orders, default=[1, 2, 3, 4, 5])
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--signals", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_approx_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TGCNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Dataset directories, splits, feature preprocessing and point-cloud files.

A dataset directory holds::

    meta.json      {"n": int, "num_features": int, "num_classes": int, "name": str}
    graph.edges    "u v" per line, u < v, sorted lexicographically
    features.csv   n comma-separated rows, no header
    labels.txt     n integers, one per line
    splits.json    optional {"train": [...], "val": [...], "test": [...], "seed": int}
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .graph import Graph, SbmParams, build_graph, knn_graph, sbm_generate

META = "meta.json"
EDGES = "graph.edges"
FEATURES = "features.csv"
LABELS = "labels.txt"
SPLITS = "splits.json"

SPLIT_RATIOS = {
    "10/30/60": (0.10, 0.30),
    "60/20/20": (0.60, 0.20),
    "70/15/15": (0.70, 0.15),
    "70/0/30": (0.70, 0.0),
}


@dataclass(eq=False)
class Dataset:
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = "dataset"
    class_names: list[str] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.graph.n
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DataError(f"features have shape {self.features.shape}, expected ({n}, F)")
        if self.labels.shape != (n,):
            raise DataError(f"labels have shape {self.labels.shape}, expected ({n},)")
        if self.num_classes < 2:
            raise DataError(f"need at least 2 classes, got {self.num_classes}")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DataError(f"labels must lie in [0, {self.num_classes})")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def one_hot(self) -> np.ndarray:
        return np.eye(self.num_classes)[self.labels]


@dataclass(frozen=True)
class SplitSpec:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int = 0
    tag: str = "custom"

    def validate(self, n: int) -> None:
        parts = [np.asarray(p, dtype=np.int64) for p in (self.train, self.val, self.test)]
        joined = np.concatenate(parts)
        if joined.size and (joined.min() < 0 or joined.max() >= n):
            raise DataError(f"split indices must lie in [0, {n})")
        if np.unique(joined).size != joined.size:
            raise ConfigError("train/val/test splits overlap")


def make_splits(n: int, tag: str, seed: int) -> SplitSpec:
    """Random train/val/test partition of ``range(n)`` for a ratio tag.

    Train and validation sizes are rounded; the remainder goes to test.
    """
    if tag not in SPLIT_RATIOS:
        raise ConfigError(f"unknown split tag {tag!r}; expected one of {sorted(SPLIT_RATIOS)}")
    if n < 10:
        raise ConfigError(f"need at least 10 nodes to split, got {n}")
    r_train, r_val = SPLIT_RATIOS[tag]
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * r_train))
    n_val = int(round(n * r_val))
    return SplitSpec(
        train=np.sort(perm[:n_train]),
        val=np.sort(perm[n_train:n_train + n_val]),
        test=np.sort(perm[n_train + n_val:]),
        seed=int(seed),
        tag=tag,
    )


def row_normalize_features(X: np.ndarray) -> np.ndarray:
    """Divide each nonzero row by its L1 norm."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.abs(X).sum(axis=1, keepdims=True)
    return np.divide(X, norms, out=X.copy(), where=norms > 0)


# -- directory format --------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x)) if x != int(x) else str(int(x))


def save_dataset(dataset: Dataset, directory) -> None:
    """Write ``dataset`` in the directory format; output is byte-deterministic."""
    path = Path(directory)
    try:
        path.mkdir(parents=True, exist_ok=True)
        meta = {
            "n": dataset.n,
            "num_features": dataset.num_features,
            "num_classes": dataset.num_classes,
            "name": dataset.name,
        }
        (path / META).write_text(json.dumps(meta) + "\n", encoding="utf-8")
        with open(path / EDGES, "w", encoding="ascii", newline="\n") as fh:
            fh.writelines(f"{u} {v}\n" for u, v in dataset.graph.edges.tolist())
        with open(path / FEATURES, "w", encoding="ascii", newline="\n") as fh:
            for row in dataset.features.tolist():
                fh.write(",".join(_fmt(x) for x in row) + "\n")
        with open(path / LABELS, "w", encoding="ascii", newline="\n") as fh:
            fh.writelines(f"{y}\n" for y in dataset.labels.tolist())
    except OSError as exc:
        raise DataError(f"cannot write dataset to {path}: {exc}") from exc


def _lines(path: Path) -> list[str]:
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def load_dataset(directory) -> Dataset:
    """Read a dataset directory, cross-checking sizes across files."""
    path = Path(directory)
    try:
        meta = json.loads((path / META).read_text(encoding="utf-8"))
        n, n_feat, n_cls = int(meta["n"]), int(meta["num_features"]), int(meta["num_classes"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"bad or missing {path / META}: {exc}") from exc

    edges = []
    for lineno, line in enumerate(_lines(path / EDGES), 1):
        if not line.strip():
            continue
        parts = line.split()
        try:
            if len(parts) != 2:
                raise ValueError
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataError(f"{path / EDGES}:{lineno}: expected 'u v', got {line!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise DataError(f"{path / EDGES}:{lineno}: node id outside [0, {n})")
        edges.append((u, v))

    rows = [ln for ln in _lines(path / FEATURES)]
    if len(rows) != n:
        raise DataError(f"{path / FEATURES} has {len(rows)} rows, meta says n={n}")
    features = np.empty((n, n_feat))
    for lineno, line in enumerate(rows, 1):
        try:
            vals = [float(x) for x in line.split(",")] if n_feat else []
        except ValueError:
            raise DataError(f"{path / FEATURES}:{lineno}: unparseable number in {line[:60]!r}") from None
        if len(vals) != n_feat:
            raise DataError(f"{path / FEATURES}:{lineno}: {len(vals)} columns, meta says {n_feat}")
        features[lineno - 1] = vals

    label_lines = _lines(path / LABELS)
    if len(label_lines) != n:
        raise DataError(f"{path / LABELS} has {len(label_lines)} lines, meta says n={n}")
    labels = np.empty(n, dtype=np.int64)
    for lineno, line in enumerate(label_lines, 1):
        try:
            labels[lineno - 1] = int(line.strip())
        except ValueError:
            raise DataError(f"{path / LABELS}:{lineno}: not an integer: {line!r}") from None
        if not 0 <= labels[lineno - 1] < n_cls:
            raise DataError(f"{path / LABELS}:{lineno}: label {labels[lineno - 1]} outside [0, {n_cls})")

    return Dataset(
        graph=build_graph(edges, n),
        features=features,
        labels=labels,
        num_classes=n_cls,
        name=str(meta.get("name", path.name)),
    )


def save_splits(split: SplitSpec, directory) -> None:
    doc = {
        "train": [int(i) for i in split.train],
        "val": [int(i) for i in split.val],
        "test": [int(i) for i in split.test],
        "seed": int(split.seed),
    }
    Path(directory, SPLITS).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_splits(directory) -> SplitSpec | None:
    """Read ``splits.json`` if present, else return ``None``."""
    path = Path(directory, SPLITS)
    if not path.exists():
        return None
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return SplitSpec(
            train=np.asarray(doc["train"], dtype=np.int64),
            val=np.asarray(doc["val"], dtype=np.int64),
            test=np.asarray(doc["test"], dtype=np.int64),
            seed=int(doc.get("seed", 0)),
            tag="file",
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"bad {path}: {exc}") from exc


# -- point clouds ------------------------------------------------------------


def load_point_cloud(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse ``x y z label`` lines into ``(points, labels)``."""
    points, labels = [], []
    for lineno, line in enumerate(_lines(Path(path)), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise DataError(f"{path}:{lineno}: expected 'x y z label', got {len(parts)} field(s)")
        try:
            xyz = [float(v) for v in parts[:3]]
        except ValueError:
            raise DataError(f"{path}:{lineno}: unparseable coordinate in {line!r}") from None
        try:
            label = int(parts[3])
        except ValueError:
            raise DataError(f"{path}:{lineno}: label {parts[3]!r} is not an integer") from None
        points.append(xyz)
        labels.append(label)
    return np.asarray(points, dtype=np.float64).reshape(-1, 3), np.asarray(labels, dtype=np.int64)


def save_point_cloud(path, points: np.ndarray, labels: np.ndarray) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for (x, y, z), lab in zip(np.asarray(points).tolist(), np.asarray(labels).tolist()):
            fh.write(f"{x!r} {y!r} {z!r} {int(lab)}\n")


def point_cloud_dataset(points: np.ndarray, labels: np.ndarray, k: int = 20,
                        name: str = "point-cloud") -> Dataset:
    """kNN graph over the points with raw coordinates as node features."""
    labels = np.asarray(labels, dtype=np.int64)
    return Dataset(
        graph=knn_graph(points, k),
        features=np.asarray(points, dtype=np.float64),
        labels=labels,
        num_classes=max(int(labels.max()) + 1, 2),
        name=name,
    )


def sbm_dataset(params: SbmParams, seed: int, name: str = "sbm") -> Dataset:
    graph, labels, features = sbm_generate(params, seed)
    return Dataset(graph=graph, features=features, labels=labels,
                   num_classes=params.blocks, name=name)


def cora_dir() -> Path | None:
    """Location of a converted Cora directory (``$TGCN_CORA_DIR``), if present."""
    p = os.environ.get("TGCN_CORA_DIR")
    if p and Path(p, META).exists():
        return Path(p)
    return None

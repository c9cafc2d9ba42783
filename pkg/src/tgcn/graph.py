"""Undirected graphs, their representing matrices, and graph generators."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import ConfigError, DataError, GraphDiagnostic, NumericalError

RAW_ADJACENCY = "raw-adjacency"
RANDOM_WALK = "random-walk"
SYM_NORMALIZED = "sym-normalized-selfloop"
PAGERANK = "personalized-pagerank"
CUSTOM = "custom"

KINDS = (RAW_ADJACENCY, RANDOM_WALK, SYM_NORMALIZED, PAGERANK)

# short names used on the command line
KIND_ALIASES = {
    "adj": RAW_ADJACENCY,
    "rw": RANDOM_WALK,
    "sym": SYM_NORMALIZED,
    "ppr": PAGERANK,
}

PAGERANK_TELEPORT = 0.1


def resolve_kind(kind: str) -> str:
    kind = KIND_ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ConfigError(f"unknown representation kind {kind!r}; expected one of {KINDS}")
    return kind


def _csr(matrix) -> sp.csr_matrix:
    m = sp.csr_matrix(matrix, dtype=np.float64)
    m.sum_duplicates()
    m.sort_indices()
    return m


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected, unweighted graph.

    Attributes
    ----------
    n : int
        Number of nodes.
    edges : ndarray of shape (m, 2)
        Unique undirected edges with ``u < v``, sorted lexicographically.
    adjacency : scipy.sparse.csr_matrix
        Symmetric 0/1 adjacency with sorted column indices and no self-loops.
    dropped_self_loops : int
        Number of ``(u, u)`` pairs discarded at construction.
    """

    n: int
    edges: np.ndarray
    adjacency: sp.csr_matrix = field(repr=False)
    dropped_self_loops: int = 0

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr).astype(np.int64)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def connected_components(self) -> int:
        count, _ = sp.csgraph.connected_components(self.adjacency, directed=False)
        return int(count)

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.num_edges})"


def build_graph(edge_list: Iterable[Sequence[int]], n: int) -> Graph:
    """Build a :class:`Graph` from node-id pairs.

    Both orientations and repeated pairs collapse into one undirected edge.
    Self-loop pairs are dropped and counted; a :class:`GraphDiagnostic`
    warning is emitted when any are found.
    """
    n = int(n)
    if n <= 0:
        raise DataError(f"node count must be positive, got {n}")
    pairs = np.asarray(list(edge_list) if not isinstance(edge_list, np.ndarray) else edge_list,
                       dtype=np.int64)
    if pairs.size == 0:
        pairs = pairs.reshape(0, 2)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise DataError(f"edge list must be a sequence of pairs, got shape {pairs.shape}")
    bad = np.flatnonzero((pairs < 0).any(axis=1) | (pairs >= n).any(axis=1))
    if bad.size:
        u, v = pairs[bad[0]]
        raise DataError(f"edge #{bad[0]} ({u}, {v}) has a node id outside [0, {n})")

    loops = pairs[:, 0] == pairs[:, 1]
    n_loops = int(loops.sum())
    if n_loops:
        warnings.warn(f"dropped {n_loops} self-loop pair(s)", GraphDiagnostic, stacklevel=2)
    pairs = np.sort(pairs[~loops], axis=1)
    edges = np.unique(pairs, axis=0) if pairs.shape[0] else pairs

    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adjacency = _csr(sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n)))
    edges.setflags(write=False)
    return Graph(n=n, edges=edges, adjacency=adjacency, dropped_self_loops=n_loops)


@dataclass(frozen=True, eq=False)
class PropagationMatrix:
    """A concrete representing matrix ``P``, stored sparse (CSR) or dense."""

    kind: str
    matrix: sp.csr_matrix | np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    @property
    def T(self) -> PropagationMatrix:
        m = self.matrix.T
        return PropagationMatrix(self.kind, _csr(m) if self.is_sparse else np.ascontiguousarray(m))

    def is_symmetric(self, tol: float = 0.0) -> bool:
        diff = self.matrix - self.matrix.T
        if self.is_sparse:
            return diff.nnz == 0 or abs(diff).max() <= tol
        return bool(np.abs(diff).max(initial=0.0) <= tol)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.array(self.matrix)

    def __matmul__(self, X):
        return spmm(self, X)

    @classmethod
    def from_matrix(cls, matrix, kind: str = CUSTOM) -> PropagationMatrix:
        if sp.issparse(matrix):
            return cls(kind, _csr(matrix))
        return cls(kind, np.asarray(matrix, dtype=np.float64))

    @classmethod
    def identity(cls, n: int) -> PropagationMatrix:
        return cls(CUSTOM, _csr(sp.identity(n)))


def _sym_normalized(g: Graph) -> sp.csr_matrix:
    a_tilde = g.adjacency + sp.identity(g.n, format="csr")
    d_inv_sqrt = 1.0 / np.sqrt(np.asarray(a_tilde.sum(axis=1)).ravel())
    scale = sp.diags(d_inv_sqrt)
    return _csr(scale @ a_tilde @ scale)


def build_representation(g: Graph, kind: str) -> PropagationMatrix:
    """Return the representing matrix of ``g`` of the requested kind.

    Kinds (short CLI alias in brackets):

    * ``raw-adjacency`` [adj]: ``A``
    * ``random-walk`` [rw]: ``D^-1 A``; isolated nodes keep an all-zero row
    * ``sym-normalized-selfloop`` [sym]: ``D~^-1/2 (A + I) D~^-1/2``
    * ``personalized-pagerank`` [ppr]: ``0.1 (I - 0.9 S)^-1`` with ``S`` the
      sym-normalized self-looped matrix, computed densely
    """
    kind = resolve_kind(kind)
    if kind == RAW_ADJACENCY:
        return PropagationMatrix(kind, g.adjacency.copy())
    if kind == RANDOM_WALK:
        deg = g.degrees.astype(np.float64)
        isolated = deg == 0
        if isolated.any():
            warnings.warn(
                f"{int(isolated.sum())} isolated node(s) get all-zero random-walk rows",
                GraphDiagnostic,
                stacklevel=2,
            )
        inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=~isolated)
        return PropagationMatrix(kind, _csr(sp.diags(inv) @ g.adjacency))
    if kind == SYM_NORMALIZED:
        return PropagationMatrix(kind, _sym_normalized(g))

    s = _sym_normalized(g).toarray()
    system = np.eye(g.n) - (1.0 - PAGERANK_TELEPORT) * s
    try:
        m = scipy.linalg.solve(system, PAGERANK_TELEPORT * np.eye(g.n), assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError(f"pagerank solve failed: {exc}") from exc
    if not np.all(np.isfinite(m)):
        raise NumericalError("pagerank solve produced non-finite entries")
    return PropagationMatrix(kind, 0.5 * (m + m.T))


def spmm(P: PropagationMatrix | sp.spmatrix | np.ndarray, X: np.ndarray) -> np.ndarray:
    """Multiply a representing matrix by a dense ``n x c`` matrix (or vector).

    Sparse products run row by row in CSR order, so results do not depend on
    thread count.
    """
    m = P.matrix if isinstance(P, PropagationMatrix) else P
    X = np.asarray(X, dtype=np.float64)
    if m.shape[1] != X.shape[0]:
        raise ConfigError(f"dimension mismatch: matrix {m.shape} times operand {X.shape}")
    out = m @ X
    return np.asarray(out)


def knn_graph(points: np.ndarray, k: int, chunk: int = 256) -> Graph:
    """Symmetrized k-nearest-neighbour graph over Euclidean distance.

    Node ``i`` links to its ``k`` nearest other points; the union of both
    directions is kept. Equal distances go to the lower node index.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] < 1:
        raise DataError(f"points must be an n x d matrix with d >= 1, got shape {pts.shape}")
    n = pts.shape[0]
    k = int(k)
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    if k >= n:
        raise ConfigError(f"k={k} must be smaller than the number of points n={n}")

    neighbors = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = pts[start:stop, None, :] - pts[None, :, :]
        dist = np.einsum("ijk,ijk->ij", diff, diff)
        dist[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # stable sort keeps index order among equal distances
        neighbors[start:stop] = np.argsort(dist, axis=1, kind="stable")[:, :k]

    src = np.repeat(np.arange(n), k)
    return build_graph(np.column_stack([src, neighbors.ravel()]), n)


@dataclass(frozen=True)
class SbmParams:
    """Stochastic block model parameters.

    Blocks are contiguous runs of node ids of size ``n // blocks``; the first
    ``n % blocks`` blocks get one extra node.
    """

    n: int
    blocks: int
    p_in: float
    p_out: float
    seeds_per_block: int = 1

    def validate(self) -> None:
        if self.blocks < 2:
            raise ConfigError(f"need at least 2 blocks, got {self.blocks}")
        if self.n < self.blocks:
            raise ConfigError(f"n={self.n} smaller than number of blocks {self.blocks}")
        for name in ("p_in", "p_out"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name}={p} outside [0, 1]")
        if not self.p_in > self.p_out:
            raise ConfigError(f"p_in={self.p_in} must exceed p_out={self.p_out}")
        if self.seeds_per_block < 0 or self.seeds_per_block > self.n // self.blocks:
            raise ConfigError(f"seeds_per_block={self.seeds_per_block} does not fit the block size")

    def block_labels(self) -> np.ndarray:
        base, extra = divmod(self.n, self.blocks)
        sizes = [base + (1 if b < extra else 0) for b in range(self.blocks)]
        return np.repeat(np.arange(self.blocks), sizes)


_RAW_BITS = 53


def _threshold(p: float) -> int:
    return int(round(p * (1 << _RAW_BITS)))


def sbm_generate(params: SbmParams, seed: int) -> tuple[Graph, np.ndarray, np.ndarray]:
    """Sample an SBM graph with block labels and seed-node features.

    Edge decisions compare 53-bit integers drawn from a Philox counter-based
    generator keyed by ``seed`` against integer thresholds, so the same seed
    gives the same graph on every platform. Features are one-hot block
    indicators on ``seeds_per_block`` random nodes per block; every other row
    is zero.

    Returns
    -------
    graph, labels, features
    """
    params.validate()
    n = params.n
    labels = params.block_labels()
    t_in, t_out = _threshold(params.p_in), _threshold(params.p_out)
    bitgen = np.random.Philox(key=int(seed))

    chunks = []
    for i in range(n - 1):
        raw = bitgen.random_raw(n - i - 1) >> np.uint64(64 - _RAW_BITS)
        same = labels[i + 1:] == labels[i]
        thresh = np.where(same, np.uint64(t_in), np.uint64(t_out))
        hits = np.flatnonzero(raw < thresh)
        if hits.size:
            chunks.append(np.column_stack([np.full(hits.size, i), hits + i + 1]))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    graph = build_graph(edges, n)

    rng = np.random.Generator(bitgen)
    features = np.zeros((n, params.blocks))
    for b in range(params.blocks):
        members = np.flatnonzero(labels == b)
        chosen = rng.permutation(members)[: params.seeds_per_block]
        features[chosen, b] = 1.0
    return graph, labels, features

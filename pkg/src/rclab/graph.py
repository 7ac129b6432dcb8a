"""Attributed-graph container with validation and plain-text file I/O.

The graph is undirected and loop-free. Each edge is stored exactly once as a
pair (u, v) with u < v; consumers that need the symmetric adjacency expand it
through the cached CSR view. Node features, integer class labels, and three
disjoint node splits (train/val/test) ride along with the topology.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Parse failure in a graph file, reported with its 1-based line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable attributed graph.

    features : (N, b) float64, node attribute matrix
    labels   : (N,) int64, class indices in [0, num_classes)
    edges    : (E, 2) int64, undirected pairs with u < v, unique, no loops
    train_idx / val_idx / test_idx : disjoint node-index vectors
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    edges: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(self.features, np.float64, 2))
        object.__setattr__(self, "labels", _frozen(self.labels, np.int64, 1))
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", _frozen(edges, np.int64, 2))
        for name in ("train_idx", "val_idx", "test_idx"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.int64, 1))

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def split(self, name: str) -> np.ndarray:
        try:
            return {"train": self.train_idx, "val": self.val_idx, "test": self.test_idx}[name]
        except KeyError:
            raise ValueError(f"unknown split {name!r}") from None

    @cached_property
    def adjacency(self) -> "CsrAdjacency":
        return CsrAdjacency.build(self.num_nodes, self.edges)


def _frozen(arr, dtype, ndim) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=dtype)
    if out.ndim != ndim:
        raise ValueError(f"expected {ndim}-d array, got shape {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class CsrAdjacency:
    """Fixed CSR sparsity pattern of the symmetric adjacency plus self-loops.

    Built once per Graph; per-iteration code only refills the value array, so
    assembling a weighted operator costs O(E) with no re-sorting.

    entry_src / indices : row and column of each stored entry, CSR order
    entry_edge          : index into Graph.edges of the entry, -1 on diagonal
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    entry_src: np.ndarray
    entry_edge: np.ndarray

    @classmethod
    def build(cls, num_nodes: int, edges: np.ndarray) -> "CsrAdjacency":
        num_edges = edges.shape[0]
        diag = np.arange(num_nodes, dtype=np.int64)
        src = np.concatenate([edges[:, 0], edges[:, 1], diag])
        dst = np.concatenate([edges[:, 1], edges[:, 0], diag])
        eid = np.concatenate(
            [
                np.arange(num_edges, dtype=np.int64),
                np.arange(num_edges, dtype=np.int64),
                np.full(num_nodes, -1, dtype=np.int64),
            ]
        )
        order = np.lexsort((dst, src))
        src, dst, eid = src[order], dst[order], eid[order]
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=num_nodes), out=indptr[1:])
        return cls(num_nodes, indptr, dst, src, eid)

    def matrix(self, entry_values: np.ndarray) -> sp.csr_matrix:
        """Assemble a CSR matrix from one value per stored entry."""
        return sp.csr_matrix(
            (entry_values, self.indices, self.indptr),
            shape=(self.num_nodes, self.num_nodes),
        )

    def pair_matrix(self, edge_values: np.ndarray) -> sp.csr_matrix:
        """Symmetric matrix carrying edge_values on the edge support, zero diagonal."""
        data = np.zeros(self.entry_edge.shape[0], dtype=np.float64)
        offdiag = self.entry_edge >= 0
        data[offdiag] = edge_values[self.entry_edge[offdiag]]
        return self.matrix(data)


# EdgeWeights is a plain float vector aligned with Graph.edges, entries in [0, 1].
EdgeWeights = np.ndarray


def check_weights(g: Graph, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (g.num_edges,):
        raise ValueError(f"edge weights have shape {w.shape}, expected ({g.num_edges},)")
    if w.size and (w.min() < 0.0 or w.max() > 1.0):
        raise ValueError("edge weights must lie in [0, 1]")
    return w


def weighted_degrees(g: Graph, w: np.ndarray) -> np.ndarray:
    """Per-node sum of incident edge weights (no self-loop contribution)."""
    w = check_weights(g, w)
    deg = np.bincount(g.edges[:, 0], weights=w, minlength=g.num_nodes)
    deg += np.bincount(g.edges[:, 1], weights=w, minlength=g.num_nodes)
    return deg


def validate(g: Graph) -> list[str]:
    """Return a list of invariant violations; empty means the graph is well formed.

    Violations are data, not exceptions, so callers can report all of them.
    """
    out = []
    n, c = g.num_nodes, g.num_classes
    if g.labels.shape[0] != n:
        out.append(f"label_count mismatch: {g.labels.shape[0]} labels for {n} nodes")
    bad = np.where((g.labels < 0) | (g.labels >= c))[0]
    for i in bad[:10]:
        out.append(f"label_out_of_range node={i} label={g.labels[i]}")
    if g.num_edges:
        u, v = g.edges[:, 0], g.edges[:, 1]
        for i in np.where((u < 0) | (u >= n) | (v < 0) | (v >= n))[0][:10]:
            out.append(f"edge_endpoint_out_of_range edge={i} pair=({u[i]},{v[i]})")
        for i in np.where(u == v)[0][:10]:
            out.append(f"self_loop edge={i} node={u[i]}")
        for i in np.where(u > v)[0][:10]:
            out.append(f"edge_not_sorted edge={i} pair=({u[i]},{v[i]})")
        ok = (u >= 0) & (v >= 0) & (u < n) & (v < n)
        key = np.minimum(u[ok], v[ok]) * np.int64(max(n, 1)) + np.maximum(u[ok], v[ok])
        uniq, counts = np.unique(key, return_counts=True)
        for k in uniq[counts > 1][:10]:
            out.append(f"duplicate_edge pair=({k // max(n, 1)},{k % max(n, 1)})")
    splits = {"train": g.train_idx, "val": g.val_idx, "test": g.test_idx}
    for name, idx in splits.items():
        if idx.size and ((idx.min() < 0) or (idx.max() >= n)):
            out.append(f"split_index_out_of_range split={name}")
        if np.unique(idx).size != idx.size:
            out.append(f"split_duplicate_index split={name}")
    for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
        if np.intersect1d(splits[a], splits[b]).size:
            out.append(f"split_overlap splits={a},{b}")
    in_range = g.train_idx[(g.train_idx >= 0) & (g.train_idx < n)]
    present = np.unique(g.labels[in_range]) if in_range.size else np.empty(0, np.int64)
    for cls in range(c):
        if cls not in present:
            out.append(f"class_missing_from_train label={cls}")
    return out


def graphs_equal(a: Graph, b: Graph) -> bool:
    """Exact field-for-field equality."""
    return (
        a.num_classes == b.num_classes
        and a.features.shape == b.features.shape
        and np.array_equal(a.features, b.features)
        and np.array_equal(a.labels, b.labels)
        and np.array_equal(a.edges, b.edges)
        and np.array_equal(a.train_idx, b.train_idx)
        and np.array_equal(a.val_idx, b.val_idx)
        and np.array_equal(a.test_idx, b.test_idx)
    )


def format_real(x: float) -> str:
    """Canonical text form of a real: 9 significant digits, C locale."""
    return f"{x:.9g}"


def quantize_reals(arr: np.ndarray) -> np.ndarray:
    """Round values to what the text format can represent.

    Values produced here survive save/load byte-exactly.
    """
    flat = np.asarray(arr, dtype=np.float64).ravel()
    out = np.fromiter((float(f"{x:.9g}") for x in flat), dtype=np.float64, count=flat.size)
    return out.reshape(np.shape(arr))


def save_graph(g: Graph, path) -> None:
    """Write the line-oriented text format; output bytes are deterministic."""
    lines = [f"{g.num_nodes} {g.num_features} {g.num_classes} {g.num_edges}"]
    for row in g.features:
        lines.append(" ".join(format_real(x) for x in row))
    lines.append(" ".join(str(x) for x in g.labels))
    for idx in (g.train_idx, g.val_idx, g.test_idx):
        lines.append(" ".join(str(x) for x in idx))
    for u, v in g.edges:
        lines.append(f"{u} {v}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def _parse_ints(text: str, lineno: int, what: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split()]
    except ValueError:
        raise GraphFormatError(lineno, f"malformed {what}: {text!r}") from None


def load_graph(path) -> Graph:
    """Parse a graph file, reporting any defect with its line number."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise GraphFormatError(1, "malformed header: empty file")
    header = _parse_ints(lines[0], 1, "header")
    if len(header) != 4:
        raise GraphFormatError(1, f"malformed header: expected 'N b C E', got {lines[0]!r}")
    n, b, c, e = header
    if n < 0 or b < 1 or c < 1 or e < 0:
        raise GraphFormatError(1, f"malformed header: nonpositive field in {header}")
    expected = 1 + n + 1 + 3 + e
    body = [ln for ln in lines]
    while len(body) > expected and not body[-1].strip():
        body.pop()
    if len(body) != expected:
        raise GraphFormatError(len(body), f"expected {expected} lines, found {len(body)}")

    features = np.empty((n, b), dtype=np.float64)
    for i in range(n):
        lineno = 2 + i
        toks = body[lineno - 1].split()
        if len(toks) != b:
            raise GraphFormatError(lineno, f"expected {b} features, got {len(toks)}")
        try:
            features[i] = [float(t) for t in toks]
        except ValueError:
            raise GraphFormatError(lineno, f"malformed real in {body[lineno - 1]!r}") from None

    lineno = n + 2
    labels = _parse_ints(body[lineno - 1], lineno, "label line")
    if len(labels) != n:
        raise GraphFormatError(lineno, f"expected {n} labels, got {len(labels)}")
    labels = np.asarray(labels, dtype=np.int64)
    for i in np.where((labels < 0) | (labels >= c))[0][:1]:
        raise GraphFormatError(lineno, f"label out of range: node {i} has label {labels[i]}")

    split_arrays = []
    for k, name in enumerate(("train", "val", "test")):
        lineno = n + 3 + k
        idx = np.asarray(_parse_ints(body[lineno - 1], lineno, f"{name} split"), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise GraphFormatError(lineno, f"{name} split index out of range")
        if np.unique(idx).size != idx.size:
            raise GraphFormatError(lineno, f"duplicate index in {name} split")
        split_arrays.append(idx)
    for (a, name_a), (bb, name_b) in (
        ((0, "train"), (1, "val")),
        ((0, "train"), (2, "test")),
        ((1, "val"), (2, "test")),
    ):
        if np.intersect1d(split_arrays[a], split_arrays[bb]).size:
            raise GraphFormatError(n + 3 + bb, f"split_overlap between {name_a} and {name_b}")

    edges = np.empty((e, 2), dtype=np.int64)
    seen = set()
    for j in range(e):
        lineno = n + 6 + j
        pair = _parse_ints(body[lineno - 1], lineno, "edge")
        if len(pair) != 2:
            raise GraphFormatError(lineno, f"malformed edge line {body[lineno - 1]!r}")
        u, v = pair
        if u < 0 or u >= n or v < 0 or v >= n:
            raise GraphFormatError(lineno, f"edge endpoint out of range: ({u},{v})")
        if u == v:
            raise GraphFormatError(lineno, f"self_loop: ({u},{v})")
        if u > v:
            raise GraphFormatError(lineno, f"edge endpoints not sorted (need u<v): ({u},{v})")
        if (u, v) in seen:
            raise GraphFormatError(lineno, f"duplicate_edge: ({u},{v})")
        seen.add((u, v))
        edges[j] = (u, v)

    return Graph(
        features=features,
        labels=labels,
        num_classes=c,
        edges=edges,
        train_idx=split_arrays[0],
        val_idx=split_arrays[1],
        test_idx=split_arrays[2],
    )

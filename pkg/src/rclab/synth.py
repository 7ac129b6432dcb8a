"""Synthetic homophily graphs with ground-truth edge difficulty labels.

Nodes fall into C equal-size classes laid out on a circle. Class means of the
first two feature coordinates sit at angle 2*pi*c/C times a spread radius, so
classes that are close on the circle overlap more in feature space. An edge is
same-class with probability `homo`; otherwise its endpoints' circular class
distance d >= 1 is drawn with probability proportional to exp(-d) times the
number of node pairs at that distance.

Edge difficulty: distance 0 is easy, 1 is medium, >= 2 is hard.
"""

from dataclasses import dataclass

import numpy as np

from .graph import Graph, GraphFormatError, quantize_reals

EASY, MEDIUM, HARD = 0, 1, 2
DIFFICULTY_NAMES = ("easy", "medium", "hard")


@dataclass(frozen=True)
class SynthParams:
    num_nodes: int
    num_classes: int = 10
    homo: float = 0.5
    avg_degree: float = 10.0
    feature_dim: int = 16
    gaussian_spread: float = 2.5
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.num_nodes % self.num_classes != 0:
            raise ValueError("num_nodes must be divisible by num_classes")
        if not (0.0 < self.homo <= 1.0):
            raise ValueError("homo must lie in (0, 1]")
        if self.avg_degree <= 0:
            raise ValueError("avg_degree must be positive")
        if self.feature_dim < 2:
            raise ValueError("feature_dim must be >= 2 (class means use two coordinates)")
        if self.gaussian_spread <= 0:
            raise ValueError("gaussian_spread must be positive")


def circular_class_distance(c1: int, c2: int, num_classes: int) -> int:
    """Shortest distance between two classes arranged on a circle."""
    if not (0 <= c1 < num_classes and 0 <= c2 < num_classes):
        raise ValueError(f"class index out of range: ({c1}, {c2}) with C={num_classes}")
    d = abs(c1 - c2)
    return min(d, num_classes - d)


def class_means(num_classes: int, spread: float) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
    return spread * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def generate(p: SynthParams) -> tuple[Graph, np.ndarray]:
    """Sample a graph and its per-edge difficulty array, fully seeded."""
    rng = np.random.default_rng(p.seed)
    n, c = p.num_nodes, p.num_classes
    per_class = n // c
    labels = np.repeat(np.arange(c, dtype=np.int64), per_class)

    feats = rng.standard_normal((n, p.feature_dim))
    feats[:, :2] += class_means(c, p.gaussian_spread)[labels]
    feats = quantize_reals(feats)

    num_edges = int(round(n * p.avg_degree / 2.0))
    if per_class < 2:
        raise ValueError("infeasible: no same-class pairs exist with one node per class")
    same_pool = c * per_class * (per_class - 1) // 2
    total_pool = n * (n - 1) // 2
    if p.homo == 1.0 and num_edges > same_pool:
        raise ValueError(
            f"infeasible: {num_edges} same-class edges requested, only {same_pool} pairs exist"
        )
    if num_edges > total_pool // 2:
        raise ValueError(f"infeasible: {num_edges} edges requested from {total_pool} pairs")

    # Cross-class distance distribution: weight exp(-d) per pair, scaled by the
    # number of node pairs at each circular distance.
    max_d = c // 2
    dists = np.arange(1, max_d + 1)
    pairs_at_d = np.where(dists < c / 2.0, c, c // 2) * per_class * per_class
    dist_probs = np.exp(-dists.astype(np.float64)) * pairs_at_d
    dist_probs /= dist_probs.sum()

    seen: set[tuple[int, int]] = set()
    edge_list: list[tuple[int, int]] = []
    attempts, cap = 0, 100 * num_edges + 1000
    while len(edge_list) < num_edges:
        attempts += 1
        if attempts > cap:
            raise ValueError("infeasible: edge sampling exceeded the rejection cap")
        if rng.random() < p.homo:
            cls = int(rng.integers(c))
            u, v = rng.choice(per_class, size=2, replace=False)
            u, v = cls * per_class + int(u), cls * per_class + int(v)
        else:
            d = int(rng.choice(dists, p=dist_probs))
            c1 = int(rng.integers(c))
            c2 = (c1 + d) % c if (2 * d == c or rng.random() < 0.5) else (c1 - d) % c
            u = c1 * per_class + int(rng.integers(per_class))
            v = c2 * per_class + int(rng.integers(per_class))
        pair = (u, v) if u < v else (v, u)
        if pair in seen:
            continue
        seen.add(pair)
        edge_list.append(pair)

    edges = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]

    perm = rng.permutation(n)
    third = n // 3
    train = perm[: n - 2 * third]
    val = perm[n - 2 * third : n - third]
    test = perm[n - third :]
    train, val, test = _ensure_train_covers_classes(labels, train, val, test)

    g = Graph(
        features=feats,
        labels=labels,
        num_classes=c,
        edges=edges,
        train_idx=np.sort(train),
        val_idx=np.sort(val),
        test_idx=np.sort(test),
    )
    return g, edge_difficulty(g)


def _ensure_train_covers_classes(labels, train, val, test):
    """Swap nodes between splits until every class appears in train.

    Only triggers for tiny graphs; split sizes are preserved.
    """
    train, val, test = train.copy(), val.copy(), test.copy()
    num_classes = int(labels.max()) + 1
    for cls in range(num_classes):
        if (labels[train] == cls).any():
            continue
        moved = False
        for other in (val, test):
            pos = np.where(labels[other] == cls)[0]
            if not pos.size:
                continue
            counts = np.bincount(labels[train], minlength=num_classes)
            victims = np.where(counts[labels[train]] >= 2)[0]
            if not victims.size:
                continue
            train[victims[0]], other[pos[0]] = other[pos[0]], train[victims[0]]
            moved = True
            break
        if not moved:
            raise ValueError(f"cannot place class {cls} into the training split")
    return train, val, test


def edge_difficulty(g: Graph) -> np.ndarray:
    """Per-edge difficulty from the circular distance of endpoint classes."""
    c1 = g.labels[g.edges[:, 0]]
    c2 = g.labels[g.edges[:, 1]]
    d = np.abs(c1 - c2)
    d = np.minimum(d, g.num_classes - d)
    out = np.full(g.num_edges, HARD, dtype=np.int8)
    out[d == 0] = EASY
    out[d == 1] = MEDIUM
    return out


def empirical_homophily(g: Graph) -> float:
    """Fraction of edges whose endpoints share a label."""
    if g.num_edges == 0:
        raise ValueError("homophily undefined on a graph with no edges")
    return float(np.mean(g.labels[g.edges[:, 0]] == g.labels[g.edges[:, 1]]))


def save_difficulty(g: Graph, difficulty: np.ndarray, path) -> None:
    """Sidecar file: one `u v {easy|medium|hard}` line per edge, edge order."""
    difficulty = np.asarray(difficulty)
    if difficulty.shape != (g.num_edges,):
        raise ValueError("difficulty not aligned with edges")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (u, v), d in zip(g.edges, difficulty):
            fh.write(f"{u} {v} {DIFFICULTY_NAMES[d]}\n")


def load_difficulty(path, g: Graph | None = None) -> np.ndarray:
    name_to_code = {name: i for i, name in enumerate(DIFFICULTY_NAMES)}
    pairs, codes = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            toks = line.split()
            if len(toks) != 3 or toks[2] not in name_to_code:
                raise GraphFormatError(lineno, f"malformed difficulty line {line!r}")
            pairs.append((int(toks[0]), int(toks[1])))
            codes.append(name_to_code[toks[2]])
    out = np.asarray(codes, dtype=np.int8)
    if g is not None:
        if len(pairs) != g.num_edges or not np.array_equal(
            np.asarray(pairs, dtype=np.int64).reshape(-1, 2), g.edges
        ):
            raise ValueError("difficulty sidecar does not match the graph's edge list")
    return out

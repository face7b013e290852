"""Undirected weighted graphs and their normalized Laplacians.

Graphs are stored as deduplicated undirected edge lists and expanded to a
dense symmetric adjacency matrix on construction. Dense storage is
deliberate: target graphs are at most ~1000 nodes and everything downstream
(eigendecomposition, spectral filtering) is dense anyway.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParseError
from .validation import frozen


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph with nonnegative edge weights.

    Each undirected edge is stored once as (i, j, w) with i < j and expanded
    symmetrically into the dense adjacency. Self-loops are rejected.
    """

    n_nodes: int
    edges: tuple
    node_labels: tuple | None = None
    adjacency: np.ndarray = field(repr=False, default=None)

    def degrees(self):
        """Row sums of the adjacency matrix."""
        return self.adjacency.sum(axis=1)


def build_graph(n, edge_list, node_labels=None):
    """Build a Graph from an (i, j, w) edge list.

    Parameters
    ----------
    n : int
        Number of nodes.
    edge_list : iterable of (int, int, float)
        Undirected edges with nonnegative weights. Duplicate pairs
        (in either orientation) are rejected.
    """
    n = int(n)
    if n <= 0:
        raise ValueError(f"n_nodes must be positive, got {n}")
    if node_labels is not None:
        node_labels = tuple(str(s) for s in node_labels)
        if len(node_labels) != n:
            raise ValueError(f"expected {n} node labels, got {len(node_labels)}")

    adjacency = np.zeros((n, n))
    seen = set()
    canonical = []
    for i, j, w in edge_list:
        i, j, w = int(i), int(j), float(w)
        if i == j:
            raise ValueError(f"self-loop at node {i} is not allowed")
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) has index out of range [0, {n})")
        if w < 0:
            raise ValueError(f"edge ({i}, {j}) has negative weight {w}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"duplicate edge ({i}, {j})")
        seen.add(key)
        canonical.append((key[0], key[1], w))
        adjacency[i, j] = w
        adjacency[j, i] = w
    return Graph(
        n_nodes=n,
        edges=tuple(canonical),
        node_labels=node_labels,
        adjacency=frozen(adjacency),
    )


@dataclass(frozen=True)
class Laplacian:
    """Symmetrically normalized graph Laplacian I - D^{-1/2} A D^{-1/2}."""

    matrix: np.ndarray
    degree: np.ndarray


def normalized_laplacian(graph):
    """Normalized Laplacian of a graph.

    Isolated nodes (degree 0) get an identity row/column: their D^{-1/2}
    entry is treated as zero, so they contribute an eigenvalue of 1.
    """
    deg = graph.degrees()
    with np.errstate(divide="ignore"):
        inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    mat = np.eye(graph.n_nodes) - inv_sqrt[:, None] * graph.adjacency * inv_sqrt[None, :]
    mat = 0.5 * (mat + mat.T)
    return Laplacian(matrix=frozen(mat), degree=frozen(deg))


def random_connected_graph(n, extra_edge_prob=0.2, seed=0):
    """Random connected graph: a spanning path plus random extra unit edges.

    Deterministic for a fixed seed; handy for synthetic experiments.
    """
    rng = np.random.default_rng(seed)
    edges = [(i, i + 1, 1.0) for i in range(n - 1)]
    for i in range(n):
        for j in range(i + 2, n):
            if rng.random() < extra_edge_prob:
                edges.append((i, j, 1.0))
    return build_graph(n, edges)


def community_graph(n, n_communities=2, intra_prob=0.6, inter_weight=0.3, seed=0):
    """Weakly linked dense communities.

    Nodes split into near-equal blocks; each block gets a spanning path
    plus random intra-block unit edges, and consecutive blocks are bridged
    by one weak edge. The weak bridges create a few near-zero Laplacian
    eigenvalues whose eigenvectors are smooth community indicators, which
    is the structure the synthetic trend generator feeds on.
    """
    n_communities = int(n_communities)
    if not 1 <= n_communities <= n:
        raise ValueError(f"n_communities must lie in [1, {n}], got {n_communities}")
    rng = np.random.default_rng(seed)
    bounds = np.linspace(0, n, n_communities + 1).astype(int)
    edges = []
    seen = set()

    def add(i, j, w):
        key = (min(i, j), max(i, j))
        if key not in seen:
            seen.add(key)
            edges.append((key[0], key[1], w))

    for block in range(n_communities):
        nodes = list(range(bounds[block], bounds[block + 1]))
        for a in range(len(nodes) - 1):
            add(nodes[a], nodes[a + 1], 1.0)
        for a in range(len(nodes)):
            for b in range(a + 2, len(nodes)):
                if rng.random() < intra_prob:
                    add(nodes[a], nodes[b], 1.0)
    for block in range(n_communities - 1):
        add(bounds[block + 1] - 1, bounds[block + 1], float(inter_weight))
    return build_graph(n, edges)


def save_adjacency_csv(graph, path):
    """Write the graph as an `i,j,w` edge-list CSV (one row per edge)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,j,w\n")
        for i, j, w in graph.edges:
            fh.write(f"{i},{j},{float(w)!r}\n")


def load_adjacency_csv(path):
    """Load a graph from CSV.

    Two layouts are accepted:

    * edge list with header ``i,j,w`` and 0-based node indices;
    * dense n x n adjacency (no header), symmetric with zero diagonal.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty adjacency file")
    header = [c.strip() for c in lines[0].split(",")]
    if header[:3] == ["i", "j", "w"]:
        return _load_edge_list(lines[1:])
    return _load_dense(lines)


def _load_edge_list(lines):
    edges = []
    max_idx = -1
    for lineno, ln in enumerate(lines, start=2):
        cells = ln.split(",")
        if len(cells) != 3:
            raise ParseError(lineno, 0, f"expected 3 cells, got {len(cells)}")
        try:
            i, j, w = int(cells[0]), int(cells[1]), float(cells[2])
        except ValueError as exc:
            raise ParseError(lineno, 0, str(exc)) from exc
        edges.append((i, j, w))
        max_idx = max(max_idx, i, j)
    return build_graph(max_idx + 1, edges)


def _load_dense(lines):
    rows = []
    for lineno, ln in enumerate(lines, start=1):
        cells = ln.split(",")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise ParseError(lineno, 0, str(exc)) from exc
    mat = np.asarray(rows)
    n = mat.shape[0]
    if mat.ndim != 2 or mat.shape[1] != n:
        raise DataError(f"dense adjacency must be square, got shape {mat.shape}")
    if not np.allclose(mat, mat.T):
        raise DataError("dense adjacency must be symmetric")
    if np.any(np.diag(mat) != 0):
        raise DataError("dense adjacency must have a zero diagonal")
    edges = [(i, j, mat[i, j]) for i in range(n) for j in range(i + 1, n) if mat[i, j] != 0]
    return build_graph(n, edges)

"""Co-visibility graph over an image collection.

Images become nodes; edges connect pairs likely to share scene content,
ranked by cosine similarity of globally mean-pooled descriptors. The
selected edge set is each node's top-k neighbors plus a maximum-similarity
spanning tree, which guarantees connectivity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedGraphError, InsufficientDataError, ShapeMismatchError
from .matching import FeatureMap

Edge = tuple[int, int]


def _ordered(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


@dataclass
class SceneGraph:
    """Undirected weighted graph; edge keys are (i, j) with i < j."""

    names: list[str]
    edges: dict[Edge, float] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.names)
        for (i, j), score in self.edges.items():
            if i == j:
                raise ValueError(f"self-edge at node {i}")
            if not (0 <= i < j < n):
                raise ValueError(f"edge ({i}, {j}) out of range or unordered")
            if abs(score) > 1.0 + 1e-9:
                raise ValueError(f"edge ({i}, {j}) score {score} outside [-1, 1]")

    @property
    def n_nodes(self) -> int:
        return len(self.names)

    def neighbors(self, i: int) -> list[int]:
        out = [j if a == i else a for (a, j) in self.edges if i in (a, j)]
        return sorted(out)

    def components(self) -> list[list[int]]:
        """Connected components, largest first, deterministic order."""
        n = self.n_nodes
        seen = [False] * n
        comps = []
        for start in range(n):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in self.neighbors(u):
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            comps.append(sorted(comp))
        comps.sort(key=lambda c: (-len(c), c[0]))
        return comps

    def is_connected(self) -> bool:
        return self.n_nodes <= 1 or len(self.components()) == 1


def pairwise_similarity(features: list[FeatureMap]) -> np.ndarray:
    """Cosine similarity of mean-pooled, L2-normalized global descriptors.

    The diagonal is fixed at 1. Images whose pooled descriptor has zero
    norm are flagged by scoring 0 against everything else.
    """
    if len(features) < 2:
        raise InsufficientDataError("need at least 2 images")
    dims = {f.dim for f in features}
    if len(dims) != 1:
        raise ShapeMismatchError(f"descriptor dims differ: {sorted(dims)}")
    pooled = np.stack([f.data.reshape(-1, f.dim).mean(axis=0) for f in features])
    norms = np.linalg.norm(pooled, axis=1)
    live = norms > 0
    unit = np.where(live[:, None], pooled / np.where(live, norms, 1.0)[:, None], 0.0)
    scores = unit @ unit.T
    scores[~live, :] = 0.0
    scores[:, ~live] = 0.0
    np.fill_diagonal(scores, 1.0)
    return scores


def maximum_similarity_spanning_tree(
    n: int, edge_scores: dict[Edge, float]
) -> list[Edge]:
    """Prim's algorithm maximizing similarity; ties go to the smallest (i, j) pair.

    Raises DisconnectedGraphError when the edge set cannot span all nodes.
    """
    if n == 0:
        return []
    adjacency: dict[int, list[tuple[int, float]]] = {i: [] for i in range(n)}
    for (i, j), s in edge_scores.items():
        if np.isfinite(s):
            adjacency[i].append((j, s))
            adjacency[j].append((i, s))
    in_tree = [False] * n
    in_tree[0] = True
    tree: list[Edge] = []
    for _ in range(n - 1):
        best: tuple[float, int, int] | None = None
        for u in range(n):
            if not in_tree[u]:
                continue
            for v, s in adjacency[u]:
                if in_tree[v]:
                    continue
                key = (-s, *_ordered(u, v))
                if best is None or key < best:
                    best = key
        if best is None:
            comps = SceneGraph(
                names=[str(i) for i in range(n)],
                edges={e: min(s, 1.0) for e, s in edge_scores.items()},
            ).components()
            raise DisconnectedGraphError(
                "edge set does not span all nodes", components=comps
            )
        _, u, v = best
        tree.append(_ordered(u, v))
        in_tree[u if not in_tree[u] else v] = True
    return tree


def build_graph(
    scores: np.ndarray, k: int = 10, names: list[str] | None = None
) -> SceneGraph:
    """Select edges: union of top-k neighbors per node and the spanning tree.

    Deterministic for a fixed score matrix; score ties resolve to lower
    node indices. Edge count is at most n*k + (n - 1).
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if n < 2:
        raise InsufficientDataError("need at least 2 nodes")
    if scores.shape != (n, n):
        raise ShapeMismatchError("score matrix must be square")
    if not np.allclose(scores, scores.T, atol=1e-9):
        raise ValueError("score matrix must be symmetric")
    if k < 1:
        raise ValueError("k must be >= 1")
    if names is None:
        names = [str(i) for i in range(n)]
    k = min(k, n - 1)
    edges: dict[Edge, float] = {}
    for i in range(n):
        others = [j for j in range(n) if j != i]
        # stable sort on index, then stable sort on descending score
        others.sort()
        others.sort(key=lambda j: -scores[i, j])
        for j in others[:k]:
            edges[_ordered(i, j)] = float(scores[_ordered(i, j)])
    all_edges = {
        (i, j): float(scores[i, j]) for i in range(n) for j in range(i + 1, n)
    }
    for e in maximum_similarity_spanning_tree(n, all_edges):
        edges[e] = float(scores[e])
    graph = SceneGraph(names=names, edges=edges)
    if not graph.is_connected():
        raise DisconnectedGraphError(
            "selected edges do not connect the graph", components=graph.components()
        )
    return graph

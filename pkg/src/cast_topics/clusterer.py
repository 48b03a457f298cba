"""Density-based clustering of the reduced document embeddings.

The pipeline: exact core distances, minimum spanning tree over the
mutual-reachability graph (Prim, O(N^2)), single-linkage hierarchy,
condensation by minimum cluster size, excess-of-mass cluster selection,
and noise labelling. Everything is exact and deterministic; cluster ids
are assigned by descending size (ties by smallest member point id), which
downstream top-n selection relies on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DataError
from .reducer import ReducedEmbeddings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterParams:
    """min_samples defaults to min_cluster_size when left unset."""

    min_cluster_size: int = 15
    min_samples: int | None = None
    metric: str = "euclidean"

    def __post_init__(self):
        if self.min_cluster_size < 2:
            raise ValueError(f"min_cluster_size must be >= 2, got {self.min_cluster_size}")
        if self.min_samples is not None and self.min_samples < 1:
            raise ValueError(f"min_samples must be >= 1, got {self.min_samples}")
        if self.metric != "euclidean":
            raise ValueError(f"unsupported metric: {self.metric!r}")

    @property
    def effective_min_samples(self) -> int:
        return self.min_cluster_size if self.min_samples is None else self.min_samples

    def to_json_dict(self) -> dict:
        return {
            "min_cluster_size": self.min_cluster_size,
            "min_samples": self.effective_min_samples,
            "metric": self.metric,
        }


class CondensedEdge(NamedTuple):
    parent: int
    child: int
    lam: float
    child_size: int


@dataclass
class ClusterResult:
    """Flat clustering with the condensed hierarchy it came from.

    labels: per-point cluster id, -1 for noise, ids dense 0..C-1 sorted by
    descending cluster size. probabilities: per-point membership strength
    in [0, 1] (diagnostic only).
    """

    labels: np.ndarray
    cluster_sizes: dict[int, int]
    condensed_tree: list[CondensedEdge]
    probabilities: np.ndarray
    mst_weight: float = 0.0

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_sizes)

    def condensed_tree_json(self) -> list[dict]:
        return [
            {
                "parent": e.parent,
                "child": e.child,
                "lambda": e.lam if np.isfinite(e.lam) else None,
                "child_size": e.child_size,
            }
            for e in self.condensed_tree
        ]


def _points_array(points: ReducedEmbeddings | np.ndarray) -> np.ndarray:
    arr = points.points if isinstance(points, ReducedEmbeddings) else points
    return np.ascontiguousarray(arr, dtype=np.float64)


def core_distances(points: ReducedEmbeddings | np.ndarray, min_samples: int) -> np.ndarray:
    """Distance from each point to its min_samples-th nearest other point."""
    x = _points_array(points)
    n = x.shape[0]
    if not 1 <= min_samples < n:
        raise DataError(f"min_samples must be in [1, N-1]={n - 1}, got {min_samples}")
    cores = np.empty(n, dtype=np.float64)
    chunk = max(1, min(2048, n))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = x[start:stop, None, :] - x[None, :, :]
        block = np.sqrt((diff**2).sum(axis=-1))
        for local, i in enumerate(range(start, stop)):
            row = np.delete(block[local], i)
            cores[i] = np.partition(row, min_samples - 1)[min_samples - 1]
    return cores


def mst_mutual_reachability(
    points: ReducedEmbeddings | np.ndarray, core: np.ndarray
) -> list[tuple[int, int, float]]:
    """Exact MST of the complete mutual-reachability graph.

    d_mr(a, b) = max(core_a, core_b, euclidean(a, b)). Prim's algorithm
    with rows computed on the fly, so memory stays O(N). Edges come back
    sorted by (weight, a, b).
    """
    x = _points_array(points)
    n = x.shape[0]
    core = np.asarray(core, dtype=np.float64)
    if core.shape != (n,):
        raise DataError(f"core distances have shape {core.shape}, expected ({n},)")
    if n == 1:
        return []

    in_tree = np.zeros(n, dtype=bool)
    best_dist = np.full(n, np.inf)
    best_from = np.zeros(n, dtype=np.int64)
    current = 0
    in_tree[0] = True
    edges: list[tuple[int, int, float]] = []

    for _ in range(n - 1):
        delta = x - x[current]
        d = np.sqrt((delta**2).sum(axis=1))
        mr = np.maximum(np.maximum(core[current], core), d)
        better = (~in_tree) & (mr < best_dist)
        best_dist[better] = mr[better]
        best_from[better] = current

        candidates = np.where(~in_tree, best_dist, np.inf)
        nxt = int(np.argmin(candidates))
        a, b = int(best_from[nxt]), nxt
        edges.append((min(a, b), max(a, b), float(best_dist[nxt])))
        in_tree[nxt] = True
        current = nxt

    edges.sort(key=lambda e: (e[2], e[0], e[1]))
    return edges


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> None:
        self.parent[self.find(a)] = self.find(b)


def _single_linkage(edges: list[tuple[int, int, float]], n: int) -> list[tuple[int, int, float, int]]:
    """Merge list from sorted MST edges: (left_node, right_node, distance,
    merged_size); node ids < n are points, internal nodes are n..2n-2."""
    uf = _UnionFind(n)
    node_of_root: dict[int, int] = {i: i for i in range(n)}
    size_of_node: dict[int, int] = {i: 1 for i in range(n)}
    merges: list[tuple[int, int, float, int]] = []
    next_node = n
    for a, b, w in edges:
        ra, rb = uf.find(a), uf.find(b)
        left, right = node_of_root[ra], node_of_root[rb]
        size = size_of_node[left] + size_of_node[right]
        merges.append((left, right, w, size))
        uf.union(ra, rb)
        root = uf.find(ra)
        node_of_root[root] = next_node
        size_of_node[next_node] = size
        next_node += 1
    return merges


def _condense_tree(
    merges: list[tuple[int, int, float, int]], n: int, min_cluster_size: int
) -> list[CondensedEdge]:
    """Prune the single-linkage hierarchy: splits where a side is smaller
    than min_cluster_size are points falling out of their parent."""

    def children_of(node: int) -> tuple[int, int, float]:
        left, right, dist, _ = merges[node - n]
        return left, right, dist

    def subtree_points(node: int) -> list[int]:
        out, stack = [], [node]
        while stack:
            cur = stack.pop()
            if cur < n:
                out.append(cur)
            else:
                left, right, _ = children_of(cur)
                stack.extend((left, right))
        return out

    def node_size(node: int) -> int:
        return 1 if node < n else merges[node - n][3]

    edges: list[CondensedEdge] = []
    if not merges:
        return edges
    root_internal = n + len(merges) - 1
    next_label = n + 1
    # stack of (internal node, condensed cluster label it belongs to)
    stack: list[tuple[int, int]] = [(root_internal, n)]
    while stack:
        node, label = stack.pop()
        left, right, dist = children_of(node)
        lam = 1.0 / dist if dist > 0.0 else np.inf
        left_size, right_size = node_size(left), node_size(right)

        big_left = left_size >= min_cluster_size
        big_right = right_size >= min_cluster_size
        if big_left and big_right:
            # min_cluster_size >= 2, so a "big" child is always internal
            for child, child_size in ((left, left_size), (right, right_size)):
                edges.append(CondensedEdge(label, next_label, lam, child_size))
                stack.append((child, next_label))
                next_label += 1
        elif big_left or big_right:
            survivor, dropped = (left, right) if big_left else (right, left)
            for point in sorted(subtree_points(dropped)):
                edges.append(CondensedEdge(label, point, lam, 1))
            stack.append((survivor, label))
        else:
            for point in sorted(subtree_points(node)):
                edges.append(CondensedEdge(label, point, lam, 1))
    return edges


def _compute_stability(edges: list[CondensedEdge], n: int) -> dict[int, float]:
    births: dict[int, float] = {n: 0.0}
    for e in edges:
        if e.child >= n:
            births[e.child] = e.lam
    stability: dict[int, float] = {c: 0.0 for c in births}
    for e in edges:
        birth = births[e.parent]
        if np.isinf(e.lam) and np.isinf(birth):
            contribution = 0.0
        else:
            contribution = (e.lam - birth) * e.child_size
        stability[e.parent] += contribution
    return stability


def _select_clusters_eom(edges: list[CondensedEdge], stability: dict[int, float], n: int) -> set[int]:
    """Excess-of-mass selection: a cluster survives iff its own stability
    is at least the summed stability of its best descendant selection.

    The root only becomes a cluster when the hierarchy never produced any
    other cluster node (e.g. all points identical), so a degenerate input
    still yields one all-points cluster instead of vacuous noise.
    """
    cluster_children: dict[int, list[int]] = {}
    for e in edges:
        if e.child >= n:
            cluster_children.setdefault(e.parent, []).append(e.child)

    clusters = [c for c in stability if c != n]
    if not clusters:
        return {n}

    selected = {c: True for c in clusters}
    score = dict(stability)
    for node in sorted(clusters, reverse=True):
        children = cluster_children.get(node, [])
        subtree = sum(score[c] for c in children)
        if children and subtree > score[node]:
            selected[node] = False
            score[node] = subtree
        else:
            # this node wins: deselect its whole subtree
            stack = list(children)
            while stack:
                sub = stack.pop()
                selected[sub] = False
                stack.extend(cluster_children.get(sub, []))
    return {c for c, keep in selected.items() if keep}


def hdbscan(points: ReducedEmbeddings | np.ndarray, params: ClusterParams) -> ClusterResult:
    """Cluster points by density; returns labels (-1 noise), sizes, the
    condensed tree and per-point membership strengths."""
    x = _points_array(points)
    n = x.shape[0]
    if n < params.min_cluster_size:
        raise DataError(
            f"need at least min_cluster_size={params.min_cluster_size} points, got {n}"
        )
    min_samples = min(params.effective_min_samples, n - 1)

    core = core_distances(x, min_samples)
    mst = mst_mutual_reachability(x, core)
    mst_weight = float(sum(w for _, _, w in mst))
    merges = _single_linkage(mst, n)
    condensed = _condense_tree(merges, n, params.min_cluster_size)

    if not condensed:
        # single point; ClusterParams bounds make this unreachable in the
        # pipeline but keep the behaviour total
        labels = np.zeros(n, dtype=np.int64)
        return ClusterResult(labels, {0: n}, [], np.ones(n), 0.0)

    stability = _compute_stability(condensed, n)
    chosen = _select_clusters_eom(condensed, stability, n)

    point_parent = np.full(n, -1, dtype=np.int64)
    point_lambda = np.full(n, np.nan)
    cluster_parent: dict[int, int] = {}
    for e in condensed:
        if e.child < n:
            point_parent[e.child] = e.parent
            point_lambda[e.child] = e.lam
        else:
            cluster_parent[e.child] = e.parent

    raw_labels = np.full(n, -1, dtype=np.int64)
    for p in range(n):
        c = int(point_parent[p])
        while c not in chosen and c != n:
            c = cluster_parent[c]
        if c in chosen:
            raw_labels[p] = c

    # canonical ids: descending size, ties by smallest member point id
    members: dict[int, np.ndarray] = {
        c: np.where(raw_labels == c)[0] for c in chosen if np.any(raw_labels == c)
    }
    order = sorted(members, key=lambda c: (-len(members[c]), int(members[c].min())))
    relabel = {c: i for i, c in enumerate(order)}

    labels = np.full(n, -1, dtype=np.int64)
    for c, idx in members.items():
        labels[idx] = relabel[c]
    cluster_sizes = {relabel[c]: int(len(members[c])) for c in order}

    probabilities = np.zeros(n, dtype=np.float64)
    for c, idx in members.items():
        lams = point_lambda[idx]
        death = np.max(lams)
        if not np.isfinite(death) or death == 0.0:
            probabilities[idx] = 1.0
        else:
            probabilities[idx] = np.minimum(lams, death) / death

    if not members:
        logger.warning("no cluster retained any points; all %d points are noise", n)

    return ClusterResult(labels, cluster_sizes, condensed, probabilities, mst_weight)

"""Dimensionality reduction of document embeddings before clustering.

Two reducers share one output type: an exact PCA projection (fully
deterministic, the reproducible upstream for clustering tests) and a
neighborhood-preserving manifold layout built from an exact k-nearest-
neighbor graph under cosine distance. Both are seeded and
single-threaded, so repeated runs are bit-identical.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
from scipy.optimize import curve_fit

from ._layout import optimize_layout
from .errors import DataError

DEFAULT_N_COMPONENTS = 5
DEFAULT_N_NEIGHBORS = 15
DEFAULT_MIN_DIST = 0.1
DEFAULT_N_EPOCHS = 200

_SMOOTH_K_TOL = 1e-5
_NEGATIVE_SAMPLE_RATE = 5.0
_REPULSION_STRENGTH = 1.0
_SPECTRAL_DENSE_LIMIT = 2048


@dataclass(frozen=True)
class ReduceParams:
    """Knobs for the manifold reducer.

    ``metric`` only supports cosine: document embeddings live on the unit
    sphere, where cosine is the natural distance.
    """

    n_components: int = DEFAULT_N_COMPONENTS
    n_neighbors: int = DEFAULT_N_NEIGHBORS
    metric: Literal["cosine"] = "cosine"
    min_dist: float = DEFAULT_MIN_DIST
    n_epochs: int = DEFAULT_N_EPOCHS
    seed: int = 0

    def __post_init__(self):
        if self.n_components < 2:
            raise ValueError(f"n_components must be >= 2, got {self.n_components}")
        if self.n_neighbors < 2:
            raise ValueError(f"n_neighbors must be >= 2, got {self.n_neighbors}")
        if self.metric != "cosine":
            raise ValueError(f"unsupported metric: {self.metric!r}")

    def to_json_dict(self) -> dict:
        return {
            "n_components": self.n_components,
            "n_neighbors": self.n_neighbors,
            "metric": self.metric,
            "min_dist": self.min_dist,
            "n_epochs": self.n_epochs,
            "seed": self.seed,
        }


@dataclass
class ReducedEmbeddings:
    points: np.ndarray  # (N, n_components), finite
    method: Literal["pca", "umap"]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.points)):
            raise DataError(f"{self.method} reduction produced non-finite coordinates")


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

def reduce_pca(doc_embeddings: np.ndarray, n_components: int = DEFAULT_N_COMPONENTS) -> ReducedEmbeddings:
    """Project mean-centered data onto its top principal directions.

    Deterministic up to per-axis sign, fixed by forcing each component's
    largest-magnitude loading positive. Components beyond the data's rank
    come out as exact zeros.
    """
    x = np.asarray(doc_embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a (N, dim) array, got shape {x.shape}")
    n = x.shape[0]
    if n < n_components:
        raise DataError(f"PCA needs at least n_components={n_components} points, got {n}")

    centered = x - x.mean(axis=0)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    for j in range(vt.shape[0]):
        lead = vt[j, np.argmax(np.abs(vt[j]))]
        if lead < 0:
            vt[j] = -vt[j]
            u[:, j] = -u[:, j]

    rank_tol = (s[0] * max(x.shape) * np.finfo(np.float64).eps) if s.size else 0.0
    projections = u * s
    projections[:, s <= rank_tol] = 0.0

    points = np.zeros((n, n_components), dtype=np.float64)
    keep = min(n_components, projections.shape[1])
    points[:, :keep] = projections[:, :keep]
    return ReducedEmbeddings(points=points, method="pca", params={"n_components": n_components})


def pca_component_variances(doc_embeddings: np.ndarray, n_components: int) -> np.ndarray:
    """Sample variance captured by each projected component (ddof=1)."""
    reduced = reduce_pca(doc_embeddings, n_components)
    n = reduced.points.shape[0]
    return (reduced.points**2).sum(axis=0) / (n - 1)


# ---------------------------------------------------------------------------
# Neighborhood-preserving reducer
# ---------------------------------------------------------------------------

def exact_knn_cosine(x: np.ndarray, k: int, chunk: int = 2048) -> tuple[np.ndarray, np.ndarray]:
    """k nearest neighbors (self excluded) by brute-force cosine distance.

    Returns (indices, distances), each (N, k), neighbors sorted by
    ascending distance with ties broken by point index.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k >= n:
        raise DataError(f"need more points than neighbors: N={n}, k={k}")
    norms = np.linalg.norm(x, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    xn = x / safe[:, None]

    indices = np.empty((n, k), dtype=np.int64)
    dists = np.empty((n, k), dtype=np.float64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = 1.0 - xn[start:stop] @ xn.T
        np.clip(block, 0.0, 2.0, out=block)
        for local, i in enumerate(range(start, stop)):
            row = block[local].copy()
            row[i] = np.inf
            order = np.argsort(row, kind="stable")[:k]
            indices[i] = order
            dists[i] = row[order]
    return indices, dists


def smooth_knn_calibration(knn_dists: np.ndarray, n_neighbors: int, n_iter: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (sigma, rho) for the fuzzy neighborhood kernel.

    rho is the distance to the nearest neighbor; sigma is bisected so the
    kernel's total membership sums to log2(n_neighbors).
    """
    n = knn_dists.shape[0]
    target = np.log2(n_neighbors)
    rhos = knn_dists[:, 0].copy()
    sigmas = np.empty(n, dtype=np.float64)

    for i in range(n):
        lo, hi, mid = 0.0, np.inf, 1.0
        shifted = knn_dists[i] - rhos[i]
        for _ in range(n_iter):
            psum = np.exp(-(np.maximum(shifted, 0.0) / mid)).sum()
            if abs(psum - target) < _SMOOTH_K_TOL:
                break
            if psum > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                mid = mid * 2.0 if hi == np.inf else (lo + hi) / 2.0
        sigmas[i] = mid
    return sigmas, rhos


def fuzzy_neighborhood_graph(
    knn_indices: np.ndarray,
    knn_dists: np.ndarray,
    sigmas: np.ndarray,
    rhos: np.ndarray,
) -> scipy.sparse.coo_matrix:
    """Directed membership strengths combined by the fuzzy union a+b-ab.

    The result is exactly symmetric.
    """
    n, k = knn_indices.shape
    rows = np.repeat(np.arange(n, dtype=np.int64), k)
    cols = knn_indices.reshape(-1)
    shifted = knn_dists - rhos[:, None]
    vals = np.where(
        shifted <= 0.0, 1.0, np.exp(-(np.maximum(shifted, 0.0) / sigmas[:, None]))
    ).reshape(-1)

    mat = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n))
    mat.sum_duplicates()
    transpose = mat.transpose()
    product = mat.multiply(transpose)
    union = (mat + transpose - product).tocoo()
    union.eliminate_zeros()
    return union


def spectral_initialization(
    graph: scipy.sparse.spmatrix, n_components: int, seed: int
) -> np.ndarray:
    """Eigenvectors of the symmetric normalized graph Laplacian, scaled to
    max coordinate 10 with a little seeded jitter; seeded random fallback
    if the eigensolver fails."""
    rng = np.random.default_rng(seed)
    n = graph.shape[0]
    try:
        if n <= _SPECTRAL_DENSE_LIMIT:
            w = graph.toarray().astype(np.float64)
            deg = w.sum(axis=1)
            dinv = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
            lap = np.eye(n) - (dinv[:, None] * w) * dinv[None, :]
            _, vecs = np.linalg.eigh(lap)
            component = vecs[:, 1 : n_components + 1]
        else:
            w = graph.tocsr().astype(np.float64)
            deg = np.asarray(w.sum(axis=1)).reshape(-1)
            dinv = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
            dmat = scipy.sparse.diags(dinv)
            lap = scipy.sparse.identity(n) - dmat @ w @ dmat
            v0 = rng.uniform(-1, 1, n)
            _, vecs = scipy.sparse.linalg.eigsh(lap, k=n_components + 1, sigma=0.0, v0=v0)
            component = vecs[:, 1 : n_components + 1]
        if component.shape[1] < n_components:
            raise np.linalg.LinAlgError("not enough eigenvectors")
        for j in range(component.shape[1]):
            lead = component[np.argmax(np.abs(component[:, j])), j]
            if lead < 0:
                component[:, j] = -component[:, j]
        peak = np.abs(component).max()
        if peak <= 0:
            raise np.linalg.LinAlgError("degenerate spectral embedding")
        layout = component * (10.0 / peak)
    except Exception:
        layout = rng.uniform(-10.0, 10.0, (n, n_components))
    layout = layout + rng.normal(0.0, 1e-4, layout.shape)
    return layout.astype(np.float32)


@functools.lru_cache(maxsize=None)
def layout_curve_params(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """Fit the (a, b) of the low-dimensional similarity curve
    1 / (1 + a d^(2b)) to an offset exponential with the given min_dist."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.zeros(xv.shape)
    yv[xv < min_dist] = 1.0
    yv[xv >= min_dist] = np.exp(-(xv[xv >= min_dist] - min_dist) / spread)
    params, _ = curve_fit(curve, xv, yv)
    return float(params[0]), float(params[1])


def _epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    result = -1.0 * np.ones(weights.shape[0], dtype=np.float64)
    n_samples = n_epochs * (weights / weights.max())
    result[n_samples > 0] = float(n_epochs) / n_samples[n_samples > 0]
    return result


def reduce_umap(doc_embeddings: np.ndarray, params: ReduceParams) -> ReducedEmbeddings:
    """Manifold layout: exact cosine kNN graph, fuzzy union, spectral
    initialization, then seeded negative-sampling SGD.

    Fully deterministic for a given seed (fixed traversal order, seeded
    sampling, single thread).
    """
    x = np.asarray(doc_embeddings, dtype=np.float64)
    n = x.shape[0]
    if n <= params.n_neighbors:
        raise DataError(
            f"need more points than n_neighbors: N={n}, n_neighbors={params.n_neighbors}"
        )

    knn_idx, knn_dists = exact_knn_cosine(x, params.n_neighbors)
    sigmas, rhos = smooth_knn_calibration(knn_dists, params.n_neighbors)
    graph = fuzzy_neighborhood_graph(knn_idx, knn_dists, sigmas, rhos).tocoo()

    if graph.nnz:
        floor = graph.data.max() / float(params.n_epochs)
        graph.data[graph.data < floor] = 0.0
        graph.eliminate_zeros()

    embedding = spectral_initialization(graph.tocsr(), params.n_components, params.seed)

    if graph.nnz:
        a, b = layout_curve_params(params.min_dist)
        eps = _epochs_per_sample(graph.data, params.n_epochs)
        rng_state = np.random.default_rng(params.seed).integers(
            low=2**8, high=2**31, size=3
        ).astype(np.int64)
        optimize_layout(
            embedding,
            graph.row.astype(np.int64),
            graph.col.astype(np.int64),
            params.n_epochs,
            eps,
            a,
            b,
            rng_state,
            _REPULSION_STRENGTH,
            1.0,
            _NEGATIVE_SAMPLE_RATE,
        )

    return ReducedEmbeddings(points=embedding, method="umap", params=params.to_json_dict())


def layout_cross_entropy(
    graph: scipy.sparse.spmatrix, embedding: np.ndarray, a: float, b: float
) -> float:
    """Fuzzy-set cross-entropy between graph memberships and layout
    similarities, summed over all unordered point pairs (diagnostic)."""
    v = np.asarray(
        graph.toarray() if scipy.sparse.issparse(graph) else graph, dtype=np.float64
    )
    y = np.asarray(embedding, dtype=np.float64)
    diff = y[:, None, :] - y[None, :, :]
    d2 = (diff**2).sum(axis=-1)
    q = 1.0 / (1.0 + a * np.power(np.maximum(d2, 1e-300), b))
    eps = 1e-12
    q = np.clip(q, eps, 1.0 - eps)
    v = np.clip(v, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        attract = np.where(v > 0.0, v * (np.log(np.maximum(v, eps)) - np.log(q)), 0.0)
        repel = np.where(
            v < 1.0,
            (1.0 - v) * (np.log(np.maximum(1.0 - v, eps)) - np.log(1.0 - q)),
            0.0,
        )
    total = attract + repel
    iu = np.triu_indices(v.shape[0], k=1)
    return float(total[iu].sum())

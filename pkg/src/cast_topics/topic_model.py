"""Pipeline orchestration: clusters to topic vectors to ranked topic words.

Topic vectors are centroids of the member documents' original
high-dimensional embeddings (noise documents excluded); candidate words
that survived the self-similarity filter are hard-assigned to their
nearest topic vector by cosine similarity. The word filter never touches
clustering, so two runs differing only in threshold share identical
topic vectors and labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .clusterer import ClusterParams, ClusterResult, hdbscan
from .corpus import DEFAULT_MIN_WORD_FREQ, Document, build_vocabulary
from .embedding_store import EmbeddingStore
from .errors import DataError, PipelineError
from .reducer import ReduceParams, reduce_pca, reduce_umap
from .word_aggregation import (
    DEFAULT_SS_THRESHOLD,
    WordProfile,
    build_word_profiles,
    filter_by_threshold,
)

MODEL_FORMAT_VERSION = 1
DEFAULT_TOP_K = 10


@dataclass
class Topic:
    topic_id: int
    topic_vector: np.ndarray  # unit, original embedding dimension
    member_doc_ids: list[int]
    top_words: list[tuple[str, float]]  # descending similarity, lexicographic ties


@dataclass(frozen=True)
class FitParams:
    """Everything a fit depends on; recorded verbatim in the model config."""

    n_topics: int
    ss_threshold: float = DEFAULT_SS_THRESHOLD
    min_word_freq: int = DEFAULT_MIN_WORD_FREQ
    stopwords: tuple[str, ...] = ()
    reducer: str = "umap"
    reduce: ReduceParams = field(default_factory=ReduceParams)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    top_k: int = DEFAULT_TOP_K
    soft_words: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_topics < 1:
            raise ValueError(f"n_topics must be >= 1, got {self.n_topics}")
        if not 0.0 <= self.ss_threshold <= 1.0:
            raise ValueError(f"ss_threshold must be in [0, 1], got {self.ss_threshold}")
        if self.reducer not in ("umap", "pca"):
            raise ValueError(f"reducer must be 'umap' or 'pca', got {self.reducer!r}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")

    def with_seed(self, seed: int) -> "FitParams":
        reduce = ReduceParams(
            n_components=self.reduce.n_components,
            n_neighbors=self.reduce.n_neighbors,
            metric=self.reduce.metric,
            min_dist=self.reduce.min_dist,
            n_epochs=self.reduce.n_epochs,
            seed=seed,
        )
        return FitParams(
            n_topics=self.n_topics,
            ss_threshold=self.ss_threshold,
            min_word_freq=self.min_word_freq,
            stopwords=self.stopwords,
            reducer=self.reducer,
            reduce=reduce,
            cluster=self.cluster,
            top_k=self.top_k,
            soft_words=self.soft_words,
            seed=seed,
        )

    def to_json_dict(self) -> dict:
        return {
            "n_topics": self.n_topics,
            "ss_threshold": self.ss_threshold,
            "min_word_freq": self.min_word_freq,
            "stopwords": sorted(self.stopwords),
            "reducer": self.reducer,
            "reduce": self.reduce.to_json_dict(),
            "cluster": self.cluster.to_json_dict(),
            "top_k": self.top_k,
            "soft_words": self.soft_words,
            "seed": self.seed,
        }


@dataclass
class TopicModel:
    topics: list[Topic]
    config: dict
    diagnostics: dict
    labels: np.ndarray  # per-document cluster label from the clusterer
    condensed_tree: list = field(default_factory=list)  # debug dump, not serialized

    def to_json_dict(self) -> dict:
        return {
            "format": "cast-model",
            "version": MODEL_FORMAT_VERSION,
            "config": self.config,
            "topics": [
                {
                    "topic_id": t.topic_id,
                    "vector": [float(v) for v in t.topic_vector],
                    "member_count": len(t.member_doc_ids),
                    "top_words": [[w, float(s)] for w, s in t.top_words],
                }
                for t in self.topics
            ],
            "diagnostics": self.diagnostics,
            "labels": [int(x) for x in self.labels],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    def top_words_per_topic(self) -> list[list[str]]:
        return [[w for w, _ in t.top_words] for t in self.topics]


def select_top_n_clusters(
    result: ClusterResult, n_topics: int, diagnostics: dict | None = None
) -> list[int]:
    """Ids of the n largest clusters (ties by smallest member point id).

    A shortfall returns every cluster and records a warning in
    ``diagnostics``; zero clusters is an error.
    """
    if n_topics < 1:
        raise ValueError(f"n_topics must be >= 1, got {n_topics}")
    if result.n_clusters == 0:
        raise DataError("clustering found zero clusters; cannot select topics")

    def sort_key(cid: int) -> tuple[int, int]:
        members = np.where(result.labels == cid)[0]
        return (-result.cluster_sizes[cid], int(members.min()))

    ranked = sorted(result.cluster_sizes, key=sort_key)
    if len(ranked) < n_topics:
        if diagnostics is not None:
            diagnostics["cluster_shortfall"] = {
                "requested": n_topics,
                "found": len(ranked),
            }
        return ranked
    return ranked[:n_topics]


def topic_vectors(
    store: EmbeddingStore, result: ClusterResult, selected: list[int]
) -> dict[int, np.ndarray]:
    """L2-normalized centroid of each selected cluster's document
    embeddings, in the original high-dimensional space. Noise documents
    never contribute."""
    out: dict[int, np.ndarray] = {}
    for cid in selected:
        member_idx = np.where(result.labels == cid)[0]
        if member_idx.size == 0:
            raise DataError(f"selected cluster {cid} has no member documents")
        centroid = store.doc_embeddings[member_idx].astype(np.float64).mean(axis=0)
        norm = np.linalg.norm(centroid)
        if norm <= 0.0:
            raise DataError(f"cluster {cid} centroid has zero norm")
        out[cid] = centroid / norm
    return out


def assign_topic_words(
    candidates: set[str],
    profiles: dict[str, WordProfile],
    topic_vecs: dict[int, np.ndarray],
    top_k: int = DEFAULT_TOP_K,
    soft: bool = False,
    diagnostics: dict | None = None,
) -> dict[int, list[tuple[str, float]]]:
    """Rank candidate words against topic vectors by cosine similarity.

    Hard mode (default) assigns each candidate to its single nearest
    topic vector (ties to the lower topic id) and reports each topic's
    top_k assigned words. Soft mode ranks every candidate under every
    topic, for diagnostics.
    """
    if not candidates:
        raise DataError("empty candidate word set; nothing to assign")
    missing = candidates - set(profiles)
    if missing:
        raise DataError(f"candidates without profiles: {sorted(missing)[:5]}")

    topic_ids = sorted(topic_vecs)
    vec_matrix = np.stack([topic_vecs[t] for t in topic_ids]).astype(np.float64)
    norms = np.linalg.norm(vec_matrix, axis=1)
    if np.any(norms <= 0.0):
        raise DataError("topic vectors must have positive norm")
    vec_matrix /= norms[:, None]  # cosine similarity regardless of input scale
    words = sorted(candidates)
    directions = np.stack([profiles[w].unit_direction for w in words])  # (W, dim)
    sims = directions @ vec_matrix.T  # (W, T)

    ranked: dict[int, list[tuple[str, float]]] = {t: [] for t in topic_ids}
    if soft:
        for ti, t in enumerate(topic_ids):
            pool = sorted(zip(words, sims[:, ti]), key=lambda ws: (-ws[1], ws[0]))
            ranked[t] = [(w, float(s)) for w, s in pool[:top_k]]
        return ranked

    assigned = np.argmax(sims, axis=1)  # first (lowest id) wins ties
    for wi, w in enumerate(words):
        t = topic_ids[int(assigned[wi])]
        ranked[t].append((w, float(sims[wi, assigned[wi]])))
    for t in topic_ids:
        ranked[t].sort(key=lambda ws: (-ws[1], ws[0]))
        if len(ranked[t]) < top_k and diagnostics is not None:
            diagnostics.setdefault("topics_short_of_words", {})[str(t)] = len(ranked[t])
        ranked[t] = ranked[t][:top_k]
    return ranked


def fit(corpus: list[Document], store: EmbeddingStore, params: FitParams) -> TopicModel:
    """Run the full pipeline and return a serializable TopicModel.

    Stages: vocabulary, word aggregation + self-similarity, threshold
    filter, reduction, clustering, top-n selection, centroids, word
    assignment. Deterministic given the seed; stage failures are tagged
    with the stage name.
    """
    if len(corpus) != store.n_docs:
        raise PipelineError(
            "inputs", f"corpus has {len(corpus)} documents but store has {store.n_docs}"
        )
    if [d.id for d in corpus] != list(range(len(corpus))):
        raise PipelineError("inputs", "document ids must be dense 0..N-1 in order")

    diagnostics: dict = {}

    def stage(name: str, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(name, str(exc)) from exc

    vocab = stage(
        "vocabulary", build_vocabulary, corpus, params.min_word_freq, frozenset(params.stopwords)
    )
    diagnostics["vocabulary_size"] = len(vocab)

    profiles = stage("word_aggregation", build_word_profiles, store, vocab)
    scorable = {w: p for w, p in profiles.items() if p.self_similarity is not None}
    diagnostics["words_insufficient_occurrences"] = len(profiles) - len(scorable)

    candidates = stage("ss_filter", filter_by_threshold, scorable, params.ss_threshold)
    diagnostics["candidate_words"] = len(candidates)
    diagnostics["words_filtered_by_threshold"] = len(scorable) - len(candidates)
    if not candidates:
        raise PipelineError(
            "ss_filter",
            f"threshold {params.ss_threshold} removed every candidate word",
        )

    reduce_seeded = ReduceParams(
        n_components=params.reduce.n_components,
        n_neighbors=params.reduce.n_neighbors,
        metric=params.reduce.metric,
        min_dist=params.reduce.min_dist,
        n_epochs=params.reduce.n_epochs,
        seed=params.seed,
    )
    if params.reducer == "umap":
        reduced = stage("reduce", reduce_umap, store.doc_embeddings, reduce_seeded)
    else:
        reduced = stage("reduce", reduce_pca, store.doc_embeddings, params.reduce.n_components)

    cluster_result = stage("cluster", hdbscan, reduced, params.cluster)
    diagnostics["clusters_found"] = cluster_result.n_clusters
    diagnostics["noise_documents"] = int((cluster_result.labels == -1).sum())

    selected = stage("select_topics", select_top_n_clusters, cluster_result, params.n_topics, diagnostics)
    diagnostics["dropped_clusters"] = cluster_result.n_clusters - len(selected)

    vectors = stage("topic_vectors", topic_vectors, store, cluster_result, selected)
    ranked = stage(
        "assign_words",
        assign_topic_words,
        candidates,
        profiles,
        vectors,
        params.top_k,
        params.soft_words,
        diagnostics,
    )

    topics = [
        Topic(
            topic_id=cid,
            topic_vector=vectors[cid],
            member_doc_ids=[int(i) for i in np.where(cluster_result.labels == cid)[0]],
            top_words=ranked[cid],
        )
        for cid in selected
    ]
    config = {"format_version": MODEL_FORMAT_VERSION, **params.to_json_dict()}
    return TopicModel(
        topics=topics,
        config=config,
        diagnostics=diagnostics,
        labels=cluster_result.labels,
        condensed_tree=cluster_result.condensed_tree_json(),
    )

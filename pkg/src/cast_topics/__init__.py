"""Topic modelling from corpus-contextualized word embeddings.

Candidate topic words are embedded in their actual document contexts and
averaged across the corpus; functional words are filtered by their
self-similarity score; documents are reduced, density-clustered, and each
cluster's centroid becomes a topic vector that nearby candidate words
describe.
"""

from .clusterer import ClusterParams, ClusterResult, core_distances, hdbscan, mst_mutual_reachability
from .corpus import Document, Vocabulary, build_vocabulary, load_corpus, load_stopwords, tokenize
from .embedding_store import (
    EmbeddingStore,
    OccurrenceEmbedding,
    read_castemb,
    synthetic_provider,
    write_castemb,
    write_castemb_jsonl,
)
from .errors import CastError, DataError, ExternalServiceError, PipelineError
from .evaluation import EvalReport, LlmConfig, evaluate, llm_judge, npmi, topic_diversity
from .reducer import ReduceParams, ReducedEmbeddings, reduce_pca, reduce_umap
from .topic_model import (
    FitParams,
    Topic,
    TopicModel,
    assign_topic_words,
    fit,
    select_top_n_clusters,
    topic_vectors,
)
from .word_aggregation import (
    WordProfile,
    aggregate_word_embeddings,
    build_word_profiles,
    filter_by_threshold,
    self_similarity,
    ss_report,
)

__version__ = "0.1.0"

__all__ = [
    "CastError",
    "ClusterParams",
    "ClusterResult",
    "DataError",
    "Document",
    "EmbeddingStore",
    "EvalReport",
    "ExternalServiceError",
    "FitParams",
    "LlmConfig",
    "OccurrenceEmbedding",
    "PipelineError",
    "ReduceParams",
    "ReducedEmbeddings",
    "Topic",
    "TopicModel",
    "Vocabulary",
    "WordProfile",
    "aggregate_word_embeddings",
    "assign_topic_words",
    "build_vocabulary",
    "build_word_profiles",
    "core_distances",
    "evaluate",
    "filter_by_threshold",
    "fit",
    "hdbscan",
    "llm_judge",
    "load_corpus",
    "load_stopwords",
    "mst_mutual_reachability",
    "npmi",
    "read_castemb",
    "reduce_pca",
    "reduce_umap",
    "select_top_n_clusters",
    "self_similarity",
    "ss_report",
    "synthetic_provider",
    "tokenize",
    "topic_diversity",
    "topic_vectors",
    "write_castemb",
    "write_castemb_jsonl",
]

"""Corpus-contextualized word vectors and self-similarity filtering.

A word's vector is the mean of its occurrence embeddings across the
corpus; its self-similarity score is the mean pairwise cosine similarity
of those occurrences (diagonal self-pairs excluded). Functional words
drift with their sentences in embedding space, so their occurrences
scatter and their scores sink; thresholding on the score removes them
from topic-word candidacy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Vocabulary
from .embedding_store import EmbeddingStore, NORM_TOL
from .errors import DataError

logger = logging.getLogger(__name__)

DEFAULT_SS_THRESHOLD = 0.4


@dataclass
class WordProfile:
    """Aggregated view of one word across the corpus.

    ``e_final`` is the raw (un-normalized) float64 mean of the word's
    occurrence vectors; ``unit_direction`` renormalizes it for cosine
    comparisons. ``self_similarity`` is None until computed, and stays
    None for words with a single occurrence (no pair evidence).
    """

    word: str
    e_final: np.ndarray
    occurrence_count: int
    self_similarity: float | None = None

    @property
    def unit_direction(self) -> np.ndarray:
        norm = np.linalg.norm(self.e_final)
        if norm <= 0.0:
            raise DataError(f"word {self.word!r} has zero-norm aggregate vector")
        return self.e_final / norm


def self_similarity(occurrence_vectors: Sequence[np.ndarray] | np.ndarray) -> float:
    """Mean cosine similarity over all unordered occurrence pairs.

    Inputs must be unit vectors (within the store tolerance); they are
    not renormalized here. Uses the closed form
    (|sum v|^2 - P) / (P (P - 1)), which equals the pairwise mean for
    unit vectors. Identical vectors short-circuit to exactly 1.0.
    """
    vecs = np.asarray(occurrence_vectors, dtype=np.float64)
    if vecs.ndim != 2:
        raise ValueError(f"expected a (P, dim) array, got shape {vecs.shape}")
    p = vecs.shape[0]
    if p == 0:
        raise DataError("self-similarity of zero occurrence vectors is undefined")
    if p == 1:
        raise DataError("self-similarity needs at least 2 occurrences")
    norms = np.linalg.norm(vecs, axis=1)
    if np.abs(norms - 1.0).max() > NORM_TOL:
        bad = int(np.argmax(np.abs(norms - 1.0)))
        raise DataError(
            f"occurrence vector {bad} has norm {norms[bad]:.6f}; "
            "unit-normalizing is the store's job, not this function's"
        )
    if np.all(vecs == vecs[0]):
        return 1.0
    total = vecs.sum(axis=0)
    ss = (float(total @ total) - p) / (p * (p - 1))
    return float(min(1.0, max(-1.0, ss)))


@dataclass
class _WordAccumulator:
    total: np.ndarray
    count: int = 0
    first: np.ndarray | None = None
    all_identical: bool = True

    def add(self, vec32: np.ndarray) -> None:
        self.total += vec32.astype(np.float64)
        self.count += 1
        if self.first is None:
            self.first = vec32
        elif self.all_identical and not np.array_equal(self.first, vec32):
            self.all_identical = False


def _accumulate(store: EmbeddingStore, vocab: Vocabulary) -> dict[str, _WordAccumulator]:
    in_vocab = set(vocab.entries)
    acc: dict[str, _WordAccumulator] = {}
    for i, word in enumerate(store.occ_words):
        if word not in in_vocab:
            continue
        slot = acc.get(word)
        if slot is None:
            slot = acc[word] = _WordAccumulator(total=np.zeros(store.dim, dtype=np.float64))
        slot.add(store.occ_vectors[i])
    return acc


def aggregate_word_embeddings(
    store: EmbeddingStore, vocab: Vocabulary
) -> dict[str, WordProfile]:
    """Mean occurrence vector per vocabulary word (self-similarity unset).

    Vocabulary words with no occurrence records in the store are omitted
    with a warning.
    """
    acc = _accumulate(store, vocab)
    missing = [w for w in vocab.entries if w not in acc]
    if missing:
        logger.warning(
            "%d vocabulary words have no occurrence records and are omitted: %s",
            len(missing),
            sorted(missing)[:10],
        )
    return {
        w: WordProfile(word=w, e_final=slot.total / slot.count, occurrence_count=slot.count)
        for w, slot in acc.items()
    }


def build_word_profiles(store: EmbeddingStore, vocab: Vocabulary) -> dict[str, WordProfile]:
    """One-pass aggregation plus self-similarity for every vocabulary word.

    Single-occurrence words keep ``self_similarity=None``; downstream they
    are reported as having insufficient occurrences rather than scored.
    """
    acc = _accumulate(store, vocab)
    missing = [w for w in vocab.entries if w not in acc]
    if missing:
        logger.warning(
            "%d vocabulary words have no occurrence records and are omitted: %s",
            len(missing),
            sorted(missing)[:10],
        )
    profiles: dict[str, WordProfile] = {}
    for w, slot in acc.items():
        p = slot.count
        if p >= 2:
            if slot.all_identical:
                ss: float | None = 1.0
            else:
                raw = (float(slot.total @ slot.total) - p) / (p * (p - 1))
                ss = float(min(1.0, max(-1.0, raw)))
        else:
            ss = None
        profiles[w] = WordProfile(
            word=w, e_final=slot.total / p, occurrence_count=p, self_similarity=ss
        )
    return profiles


def filter_by_threshold(
    profiles: Mapping[str, WordProfile], threshold: float
) -> set[str]:
    """Words whose self-similarity is at least ``threshold``.

    Every profile must have a score; single-occurrence words must be
    dropped by the caller before filtering.
    """
    unset = [w for w, p in profiles.items() if p.self_similarity is None]
    if unset:
        raise DataError(
            f"{len(unset)} profiles have no self-similarity score (e.g. {sorted(unset)[:5]})"
        )
    return {w for w, p in profiles.items() if p.self_similarity >= threshold}


@dataclass
class SsReport:
    """Sorted self-similarity listing: overall top plus per-threshold slices.

    ``top`` holds the highest-scoring words; ``below_threshold[t]`` holds
    the highest-scoring words strictly below t, both descending with ties
    broken lexicographically. ``insufficient`` lists single-occurrence
    words that cannot be scored.
    """

    top: list[tuple[str, float]]
    below_threshold: dict[float, list[tuple[str, float]]]
    insufficient: list[str]
    top_n: int = 10

    def to_json_dict(self) -> dict:
        return {
            "top": [{"word": w, "self_similarity": s} for w, s in self.top],
            "below_threshold": {
                str(t): [{"word": w, "self_similarity": s} for w, s in rows]
                for t, rows in self.below_threshold.items()
            },
            "insufficient_occurrences": self.insufficient,
        }

    def render_text(self) -> str:
        thresholds = sorted(self.below_threshold, reverse=True)
        headers = [f"top {self.top_n} SS"] + [f"threshold={t:g}" for t in thresholds]
        columns = [self.top] + [self.below_threshold[t] for t in thresholds]
        cells = [
            [f"{w}:{s:.3f}" for w, s in col] + [""] * (self.top_n - len(col))
            for col in columns
        ]
        widths = [
            max([len(h)] + [len(c) for c in col]) for h, col in zip(headers, cells)
        ]
        lines = [
            "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
            "  ".join("-" * w for w in widths),
        ]
        for row in zip(*cells):
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if self.insufficient:
            lines.append("")
            lines.append(
                f"insufficient occurrences ({len(self.insufficient)}): "
                + ", ".join(self.insufficient[:20])
                + ("..." if len(self.insufficient) > 20 else "")
            )
        return "\n".join(lines)


def ss_report(
    profiles: Mapping[str, WordProfile],
    thresholds: Iterable[float] = (0.5, 0.4, 0.3),
    top_n: int = 10,
) -> SsReport:
    """Build the sorted score report used to pick a threshold by eye."""
    scored = sorted(
        ((w, p.self_similarity) for w, p in profiles.items() if p.self_similarity is not None),
        key=lambda item: (-item[1], item[0]),
    )
    below = {
        float(t): [(w, s) for w, s in scored if s < t][:top_n] for t in thresholds
    }
    insufficient = sorted(w for w, p in profiles.items() if p.self_similarity is None)
    return SsReport(
        top=scored[:top_n], below_threshold=below, insufficient=insufficient, top_n=top_n
    )

import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cast_topics import (
    DataError,
    EmbeddingStore,
    aggregate_word_embeddings,
    build_vocabulary,
    build_word_profiles,
    filter_by_threshold,
    self_similarity,
    ss_report,
    synthetic_provider,
)
from cast_topics.word_aggregation import WordProfile
from tests.conftest import make_documents


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def random_unit_vectors(rng, p, dim):
    rows = rng.standard_normal((p, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def brute_force_ss(vectors) -> float:
    """The defining O(P^2) oracle: mean pairwise cosine, diagonal excluded."""
    vectors = np.asarray(vectors, dtype=np.float64)
    p = len(vectors)
    total = 0.0
    for i in range(p):
        for j in range(i + 1, p):
            total += float(vectors[i] @ vectors[j]) / (
                np.linalg.norm(vectors[i]) * np.linalg.norm(vectors[j])
            )
    return total / (p * (p - 1) / 2)


def store_for(words_vectors: list[tuple[str, np.ndarray]], dim: int) -> EmbeddingStore:
    """One document holding the given word occurrences."""
    n = len(words_vectors)
    vecs = np.stack([v for _, v in words_vectors]).astype(np.float32)
    doc = unit(vecs.astype(np.float64).sum(axis=0)).astype(np.float32)
    return EmbeddingStore(
        dim,
        doc[None, :],
        [w for w, _ in words_vectors],
        np.zeros(n, dtype=np.uint64),
        vecs,
    )


def vocab_of(*words: str):
    docs = make_documents([" ".join(words)])
    return build_vocabulary(docs, min_word_freq=1)


class TestAggregate:
    def test_two_vector_mean(self):
        store = store_for(
            [("wx", np.array([1, 0, 0, 0, 0, 0, 0, 0.0])),
             ("wx", np.array([0, 1, 0, 0, 0, 0, 0, 0.0]))],
            dim=8,
        )
        profiles = aggregate_word_embeddings(store, vocab_of("wx"))
        np.testing.assert_allclose(profiles["wx"].e_final[:2], [0.5, 0.5])
        assert profiles["wx"].occurrence_count == 2
        assert profiles["wx"].self_similarity is None

    def test_single_occurrence_identity(self):
        v = unit(np.arange(1.0, 9.0))
        store = store_for([("wx", v)], dim=8)
        profiles = aggregate_word_embeddings(store, vocab_of("wx"))
        np.testing.assert_allclose(profiles["wx"].e_final, v, atol=1e-7)
        assert profiles["wx"].occurrence_count == 1

    def test_against_double_precision_mean_oracle(self):
        rng = np.random.default_rng(17)
        vecs = random_unit_vectors(rng, 50, 12).astype(np.float32)
        store = store_for([("wx", v) for v in vecs], dim=12)
        profiles = aggregate_word_embeddings(store, vocab_of("wx"))
        oracle = np.zeros(12, dtype=np.float64)
        for v in vecs:
            oracle += v.astype(np.float64)
        oracle /= 50
        np.testing.assert_allclose(profiles["wx"].e_final, oracle, atol=1e-6)

    def test_vocab_word_without_occurrences_warns(self, caplog):
        v = unit(np.ones(8))
        store = store_for([("seen", v), ("seen", v)], dim=8)
        with caplog.at_level(logging.WARNING):
            profiles = aggregate_word_embeddings(store, vocab_of("seen", "ghost"))
        assert "ghost" not in profiles
        assert "no occurrence records" in caplog.text

    def test_permutation_invariance(self):
        rng = np.random.default_rng(23)
        vecs = random_unit_vectors(rng, 20, 8).astype(np.float32)
        fwd = store_for([("wx", v) for v in vecs], dim=8)
        rev = store_for([("wx", v) for v in vecs[::-1]], dim=8)
        a = aggregate_word_embeddings(fwd, vocab_of("wx"))["wx"].e_final
        b = aggregate_word_embeddings(rev, vocab_of("wx"))["wx"].e_final
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestSelfSimilarity:
    def test_identical_vectors_exactly_one(self):
        v = unit([3, 1, 4, 1, 5]).astype(np.float32)
        assert self_similarity([v, v, v]) == 1.0

    def test_orthogonal_pair_is_zero(self):
        e1 = np.array([1, 0, 0, 0.0])
        e2 = np.array([0, 1, 0, 0.0])
        assert self_similarity([e1, e2]) == 0.0

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        vecs = random_unit_vectors(rng, 10, 6)
        assert abs(self_similarity(vecs) - brute_force_ss(vecs)) < 1e-9

    def test_fast_path_identity_many_sizes(self):
        rng = np.random.default_rng(99)
        for p in (2, 3, 5, 17, 30):
            vecs = random_unit_vectors(rng, p, 9)
            assert abs(self_similarity(vecs) - brute_force_ss(vecs)) < 1e-9

    def test_zero_occurrences_error(self):
        with pytest.raises(DataError):
            self_similarity(np.zeros((0, 4)))

    def test_single_occurrence_error(self):
        with pytest.raises(DataError):
            self_similarity(unit(np.ones(4))[None, :])

    def test_non_unit_vector_rejected_not_normalized(self):
        v = unit(np.ones(4))
        with pytest.raises(DataError, match="store's job"):
            self_similarity([v, 2.0 * v])

    def test_range_clamped(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            vecs = random_unit_vectors(rng, int(rng.integers(2, 12)), 5)
            assert -1.0 <= self_similarity(vecs) <= 1.0


class TestBuildProfiles:
    def test_matches_componentwise_calls(self):
        docs = make_documents(["apple pear apple", "pear apple pear", "plum"])
        store = synthetic_provider(docs, dim=8, seed=6)
        vocab = build_vocabulary(docs, min_word_freq=1)
        profiles = build_word_profiles(store, vocab)
        assert profiles["plum"].self_similarity is None  # single occurrence
        for word in ("apple", "pear"):
            vecs = np.stack(
                [store.occ_vectors[i] for i, w in enumerate(store.occ_words) if w == word]
            )
            assert profiles[word].self_similarity == pytest.approx(
                brute_force_ss(vecs), abs=1e-6
            )
            np.testing.assert_allclose(
                profiles[word].e_final,
                vecs.astype(np.float64).mean(axis=0),
                atol=1e-12,
            )

    def test_noise_free_words_score_exactly_one(self):
        docs = make_documents(["sun sun moon", "moon sun"])
        store = synthetic_provider(docs, dim=8, seed=1, noise_scale=0.0)
        vocab = build_vocabulary(docs, min_word_freq=2)
        profiles = build_word_profiles(store, vocab)
        assert profiles["sun"].self_similarity == 1.0
        assert profiles["moon"].self_similarity == 1.0


def profile(word: str, ss: float | None, p: int = 3) -> WordProfile:
    return WordProfile(
        word=word, e_final=unit(np.ones(8)), occurrence_count=p, self_similarity=ss
    )


class TestFilterByThreshold:
    def test_published_example_pair(self):
        profiles = {"armenian": profile("armenian", 0.833), "due": profile("due", 0.294)}
        assert filter_by_threshold(profiles, 0.3) == {"armenian"}

    def test_zero_threshold_keeps_everything(self):
        profiles = {w: profile(w, s) for w, s in [("a", 0.1), ("b", 0.0), ("c", 0.9)]}
        assert filter_by_threshold(profiles, 0.0) == {"a", "b", "c"}

    def test_above_one_empties_random_profiles(self):
        rng = np.random.default_rng(4)
        profiles = {f"w{i}": profile(f"w{i}", float(rng.uniform(0, 1))) for i in range(30)}
        assert filter_by_threshold(profiles, 1.0 + 1e-9) == set()

    def test_boundary_is_inclusive(self):
        profiles = {"edge": profile("edge", 0.4)}
        assert filter_by_threshold(profiles, 0.4) == {"edge"}

    def test_unset_score_rejected(self):
        with pytest.raises(DataError, match="no self-similarity"):
            filter_by_threshold({"solo": profile("solo", None, p=1)}, 0.3)

    @given(
        st.lists(st.floats(min_value=0, max_value=1), min_size=1, max_size=30),
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=1),
    )
    def test_monotone_in_threshold(self, scores, t1, t2):
        lo, hi = min(t1, t2), max(t1, t2)
        profiles = {f"w{i}": profile(f"w{i}", s) for i, s in enumerate(scores)}
        assert filter_by_threshold(profiles, hi) <= filter_by_threshold(profiles, lo)


class TestSsReport:
    def test_section_ordering(self):
        scores = {
            "high1": 0.8, "high2": 0.75, "mid1": 0.5, "mid2": 0.45,
            "low1": 0.39, "low2": 0.35, "low3": 0.2, "tiny1": 0.15,
            "tiny2": 0.1, "tiny3": 0.05,
        }
        profiles = {w: profile(w, s) for w, s in scores.items()}
        report = ss_report(profiles, thresholds=[0.4], top_n=10)
        assert [w for w, _ in report.top[:4]] == ["high1", "high2", "mid1", "mid2"]
        below = [w for w, _ in report.below_threshold[0.4]]
        assert below == ["low1", "low2", "low3", "tiny1", "tiny2", "tiny3"]

    def test_ties_break_lexicographically(self):
        profiles = {w: profile(w, 0.5) for w in ("zebra", "apple", "mango")}
        report = ss_report(profiles, thresholds=[])
        assert [w for w, _ in report.top] == ["apple", "mango", "zebra"]

    def test_empty_profiles(self):
        report = ss_report({}, thresholds=[0.4])
        assert report.top == []
        assert report.below_threshold[0.4] == []
        assert report.render_text()  # renders without blowing up

    def test_insufficient_occurrence_words_listed(self):
        profiles = {"ok": profile("ok", 0.6), "solo": profile("solo", None, p=1)}
        report = ss_report(profiles)
        assert report.insufficient == ["solo"]
        assert "solo" in report.render_text()

    def test_json_shape(self):
        profiles = {"ok": profile("ok", 0.6)}
        payload = ss_report(profiles, thresholds=[0.5]).to_json_dict()
        assert payload["top"][0] == {"word": "ok", "self_similarity": 0.6}
        assert "0.5" in payload["below_threshold"]

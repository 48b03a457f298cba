"""Deterministic mock export, byte-compatible with the consumer's
synthetic test provider.

This is the cross-implementation conformance surface: for the same
corpus, dimension and seed, the file produced here must be bit-identical
to the consumer's own synthetic store. Every hash label, RNG stream,
draw order and float32 cast below is part of that contract; change
nothing without re-pinning the shared fixture hashes.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .castemb import CastembPayload
from .corpus import tokenize

DEFAULT_NOISE_SCALE = 0.05


def _derived_rng(seed: int, label: bytes) -> np.random.Generator:
    key = int(seed).to_bytes(8, "little", signed=False)
    digest = hashlib.blake2b(label, digest_size=8, key=key).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))


def _word_base_vector(word: str, dim: int, seed: int) -> np.ndarray:
    rng = _derived_rng(seed, b"cast-synth-word:" + word.encode("utf-8"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def export_mock(
    texts: list[str],
    dim: int,
    seed: int,
    noise_scale: float = DEFAULT_NOISE_SCALE,
) -> CastembPayload:
    """Hash-derived word vectors plus seeded occurrence noise.

    Occurrence vectors are the word's unit base vector displaced by a
    random direction of length ``noise_scale`` and renormalized; document
    embeddings are the normalized float64 mean of the document's float32
    occurrence rows. Empty documents draw a random unit vector from the
    same noise stream.
    """
    if dim < 8:
        raise ValueError(f"dim must be >= 8, got {dim}")

    base_cache: dict[str, np.ndarray] = {}

    def base_for(word: str) -> np.ndarray:
        cached = base_cache.get(word)
        if cached is None:
            cached = base_cache[word] = _word_base_vector(word, dim, seed)
        return cached

    noise_rng = _derived_rng(seed, b"cast-synth-noise")
    doc_rows = np.empty((len(texts), dim), dtype=np.float32)
    payload = CastembPayload(dim=dim, doc_embeddings=doc_rows)
    occ_rows: list[np.ndarray] = []

    for doc_id, text in enumerate(texts):
        tokens = tokenize(text)
        if not tokens:
            g = noise_rng.standard_normal(dim)
            doc_rows[doc_id] = (g / np.linalg.norm(g)).astype(np.float32)
            continue
        start = len(occ_rows)
        for tok in tokens:
            vec = base_for(tok)
            if noise_scale > 0.0:
                direction = noise_rng.standard_normal(dim)
                vec = vec + noise_scale * (direction / np.linalg.norm(direction))
                vec = vec / np.linalg.norm(vec)
            row = vec.astype(np.float32)
            occ_rows.append(row)
            payload.add_occurrence(tok, doc_id, row)
        mean = np.mean(
            np.asarray(occ_rows[start:], dtype=np.float32).astype(np.float64), axis=0
        )
        doc_rows[doc_id] = (mean / np.linalg.norm(mean)).astype(np.float32)

    return payload

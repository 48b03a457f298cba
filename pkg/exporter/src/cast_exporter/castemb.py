"""CASTEMB binary writer (little-endian).

Layout: magic "CASTEMB1" | u32 version=1 | u32 dim | u64 n_docs |
u64 n_occurrences | n_docs*dim float32 document embeddings | per
occurrence: u64 doc_id | u32 word_byte_len | word UTF-8 | dim float32.
Every vector must be finite and unit-norm; the writer refuses anything
else so the output always passes the consumer's validate command.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"CASTEMB1"
VERSION = 1
NORM_TOL = 1e-4

_HEADER = struct.Struct("<II QQ")
_OCC_HEAD = struct.Struct("<QI")


@dataclass
class CastembPayload:
    dim: int
    doc_embeddings: np.ndarray  # (N, dim) float32
    occ_words: list[str] = field(default_factory=list)
    occ_doc_ids: list[int] = field(default_factory=list)
    occ_vectors: list[np.ndarray] = field(default_factory=list)

    def add_occurrence(self, word: str, doc_id: int, vector: np.ndarray) -> None:
        self.occ_words.append(word)
        self.occ_doc_ids.append(doc_id)
        self.occ_vectors.append(np.ascontiguousarray(vector, dtype=np.float32))

    def check(self) -> None:
        docs = self.doc_embeddings
        if docs.dtype != np.float32 or docs.ndim != 2 or docs.shape[1] != self.dim:
            raise ValueError(f"document block must be float32 (N, {self.dim})")
        arrays = [docs] + (
            [np.stack(self.occ_vectors)] if self.occ_vectors else []
        )
        for arr in arrays:
            if arr.size == 0:
                continue
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite embedding value")
            norms = np.linalg.norm(arr.astype(np.float64), axis=1)
            worst = np.abs(norms - 1.0).max()
            if worst > NORM_TOL:
                raise ValueError(f"embedding norm off by {worst:.2e}, tolerance {NORM_TOL}")
        if any(d >= len(docs) for d in self.occ_doc_ids):
            raise ValueError("occurrence references unknown document")

    def to_bytes(self) -> bytes:
        self.check()
        parts = [
            MAGIC,
            _HEADER.pack(VERSION, self.dim, len(self.doc_embeddings), len(self.occ_words)),
            self.doc_embeddings.tobytes(),
        ]
        for word, doc_id, vec in zip(self.occ_words, self.occ_doc_ids, self.occ_vectors):
            encoded = word.encode("utf-8")
            parts.append(_OCC_HEAD.pack(doc_id, len(encoded)))
            parts.append(encoded)
            parts.append(vec.tobytes())
        return b"".join(parts)

    def write(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    def sha256(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

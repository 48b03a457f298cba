"""The CASTEMB interchange format and a deterministic synthetic provider.

Document embeddings and per-occurrence contextualized token embeddings
arrive through a file rather than in-process encoder inference, so the
whole pipeline is testable without a model. Vectors are stored as
little-endian float32; accumulation downstream happens in float64.

Binary layout (all little-endian):
    magic "CASTEMB1" (8 bytes)
    u32 version (=1) | u32 dim | u64 n_docs | u64 n_occurrences
    n_docs * dim float32 document embeddings
    per occurrence: u64 doc_id | u32 word_byte_len | word UTF-8 | dim float32

A JSON-lines debug variant ("castemb-jsonl") with the same fields is
accepted on read, for hand-written fixtures.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .corpus import Document
from .errors import DataError

logger = logging.getLogger(__name__)

MAGIC = b"CASTEMB1"
VERSION = 1
NORM_TOL = 1e-4

_HEADER = struct.Struct("<II QQ")
_OCC_HEAD = struct.Struct("<QI")


@dataclass(frozen=True)
class OccurrenceEmbedding:
    """One contextualized embedding of ``word`` inside document ``doc_id``."""

    word: str
    doc_id: int
    vector: np.ndarray  # float32, unit norm within NORM_TOL

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccurrenceEmbedding):
            return NotImplemented
        return (
            self.word == other.word
            and self.doc_id == other.doc_id
            and self.vector.tobytes() == other.vector.tobytes()
        )


class EmbeddingStore:
    """Immutable container for document embeddings plus the occurrence stream.

    Occurrences are held as parallel arrays (words, doc ids, vectors) for
    compact storage; ``occurrences()`` yields them as records in file order.
    """

    def __init__(
        self,
        dim: int,
        doc_embeddings: np.ndarray,
        occ_words: Sequence[str] = (),
        occ_doc_ids: np.ndarray | Sequence[int] = (),
        occ_vectors: np.ndarray | None = None,
        validate: bool = True,
    ):
        self.dim = int(dim)
        self.doc_embeddings = np.ascontiguousarray(doc_embeddings, dtype=np.float32)
        if self.doc_embeddings.size == 0:
            self.doc_embeddings = self.doc_embeddings.reshape(0, self.dim)
        self.occ_words = list(occ_words)
        self.occ_doc_ids = np.asarray(occ_doc_ids, dtype=np.uint64).reshape(-1)
        if occ_vectors is None:
            occ_vectors = np.zeros((0, self.dim), dtype=np.float32)
        self.occ_vectors = np.ascontiguousarray(occ_vectors, dtype=np.float32)
        if self.occ_vectors.size == 0:
            self.occ_vectors = self.occ_vectors.reshape(0, self.dim)
        if validate:
            self.validate()

    @property
    def n_docs(self) -> int:
        return self.doc_embeddings.shape[0]

    @property
    def n_occurrences(self) -> int:
        return len(self.occ_words)

    def occurrences(self) -> Iterator[OccurrenceEmbedding]:
        for i, word in enumerate(self.occ_words):
            yield OccurrenceEmbedding(word, int(self.occ_doc_ids[i]), self.occ_vectors[i])

    def validate(self) -> None:
        """Check every format invariant; violations raise DataError."""
        if self.dim < 1:
            raise DataError(f"dim must be positive, got {self.dim}")
        if self.doc_embeddings.ndim != 2 or self.doc_embeddings.shape[1] != self.dim:
            raise DataError(
                f"doc embeddings have shape {self.doc_embeddings.shape}, expected (N, {self.dim})"
            )
        if self.occ_vectors.shape != (len(self.occ_words), self.dim):
            raise DataError(
                f"occurrence vectors have shape {self.occ_vectors.shape}, "
                f"expected ({len(self.occ_words)}, {self.dim})"
            )
        if len(self.occ_doc_ids) != len(self.occ_words):
            raise DataError("occurrence doc ids and words have different lengths")
        if not np.all(np.isfinite(self.doc_embeddings)):
            bad = int(np.where(~np.isfinite(self.doc_embeddings).all(axis=1))[0][0])
            raise DataError(f"non-finite value in document embedding {bad}")
        if not np.all(np.isfinite(self.occ_vectors)):
            bad = int(np.where(~np.isfinite(self.occ_vectors).all(axis=1))[0][0])
            raise DataError(f"non-finite value in occurrence record {bad}")
        _check_unit_norms(self.doc_embeddings, "document embedding")
        _check_unit_norms(self.occ_vectors, "occurrence record")
        if self.n_occurrences and self.occ_doc_ids.max() >= self.n_docs:
            bad = int(np.argmax(self.occ_doc_ids >= self.n_docs))
            raise DataError(
                f"occurrence references unknown document: record {bad} has "
                f"doc_id {int(self.occ_doc_ids[bad])} but store holds {self.n_docs} documents"
            )

    def norm_stats(self) -> dict[str, float]:
        """Max deviation of stored norms from 1, for validation reports."""
        stats = {}
        for name, arr in (("doc", self.doc_embeddings), ("occurrence", self.occ_vectors)):
            if arr.shape[0]:
                norms = np.linalg.norm(arr.astype(np.float64), axis=1)
                stats[f"max_{name}_norm_error"] = float(np.abs(norms - 1.0).max())
            else:
                stats[f"max_{name}_norm_error"] = 0.0
        return stats

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.doc_embeddings.tobytes() == other.doc_embeddings.tobytes()
            and self.occ_words == other.occ_words
            and self.occ_doc_ids.tobytes() == other.occ_doc_ids.tobytes()
            and self.occ_vectors.tobytes() == other.occ_vectors.tobytes()
        )


def _check_unit_norms(arr: np.ndarray, what: str) -> None:
    if arr.shape[0] == 0:
        return
    norms = np.linalg.norm(arr.astype(np.float64), axis=1)
    err = np.abs(norms - 1.0)
    if err.max() > NORM_TOL:
        bad = int(np.argmax(err))
        raise DataError(f"{what} {bad} has L2 norm {norms[bad]:.6f}, expected 1 +- {NORM_TOL}")


def write_castemb(store: EmbeddingStore, path: str | Path) -> None:
    """Write the binary format; the store is validated first.

    Reading the file back yields a store that compares equal bit-for-bit.
    """
    store.validate()
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(VERSION, store.dim, store.n_docs, store.n_occurrences))
        fh.write(store.doc_embeddings.tobytes())
        for i, word in enumerate(store.occ_words):
            wb = word.encode("utf-8")
            fh.write(_OCC_HEAD.pack(int(store.occ_doc_ids[i]), len(wb)))
            fh.write(wb)
            fh.write(store.occ_vectors[i].tobytes())


def castemb_bytes(store: EmbeddingStore) -> bytes:
    """Serialize to the binary format in memory (used for hashing)."""
    parts = [MAGIC, _HEADER.pack(VERSION, store.dim, store.n_docs, store.n_occurrences)]
    parts.append(store.doc_embeddings.tobytes())
    for i, word in enumerate(store.occ_words):
        wb = word.encode("utf-8")
        parts.append(_OCC_HEAD.pack(int(store.occ_doc_ids[i]), len(wb)))
        parts.append(wb)
        parts.append(store.occ_vectors[i].tobytes())
    return b"".join(parts)


def castemb_sha256(store: EmbeddingStore) -> str:
    return hashlib.sha256(castemb_bytes(store)).hexdigest()


def read_castemb(path: str | Path) -> EmbeddingStore:
    """Read either the binary format or the castemb-jsonl debug variant.

    The returned store is fully validated; any invariant violation is an
    error, not a warning.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"embeddings file not found: {path}")
    data = path.read_bytes()
    if data[:1] in (b"{", b" ", b"\n"):
        return _read_castemb_jsonl(data, path)
    return _read_castemb_binary(data, path)


def _read_castemb_binary(data: bytes, path: Path) -> EmbeddingStore:
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: bad magic bytes, not a CASTEMB file")
    offset = len(MAGIC)
    if len(data) < offset + _HEADER.size:
        raise DataError(f"{path}: truncated at byte {len(data)} (incomplete header)")
    version, dim, n_docs, n_occ = _HEADER.unpack_from(data, offset)
    offset += _HEADER.size
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}, expected {VERSION}")
    if dim < 1:
        raise DataError(f"{path}: dim must be positive, got {dim}")

    doc_bytes = n_docs * dim * 4
    if len(data) < offset + doc_bytes:
        raise DataError(f"{path}: truncated at byte {len(data)} (document embeddings)")
    doc_embeddings = np.frombuffer(
        data, dtype="<f4", count=n_docs * dim, offset=offset
    ).reshape(n_docs, dim)
    offset += doc_bytes

    occ_words: list[str] = []
    occ_doc_ids = np.empty(n_occ, dtype=np.uint64)
    occ_vectors = np.empty((n_occ, dim), dtype=np.float32)
    for i in range(n_occ):
        if len(data) < offset + _OCC_HEAD.size:
            raise DataError(f"{path}: truncated at byte {len(data)} (occurrence record {i})")
        doc_id, word_len = _OCC_HEAD.unpack_from(data, offset)
        offset += _OCC_HEAD.size
        if len(data) < offset + word_len + dim * 4:
            raise DataError(f"{path}: truncated at byte {len(data)} (occurrence record {i})")
        try:
            word = data[offset : offset + word_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: occurrence record {i} has invalid UTF-8 word: {exc}") from exc
        offset += word_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
        offset += dim * 4
        occ_words.append(word)
        occ_doc_ids[i] = doc_id
        occ_vectors[i] = vec
    if offset != len(data):
        raise DataError(f"{path}: {len(data) - offset} trailing bytes after last record")

    try:
        return EmbeddingStore(dim, doc_embeddings, occ_words, occ_doc_ids, occ_vectors)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _read_castemb_jsonl(data: bytes, path: Path) -> EmbeddingStore:
    lines = [ln for ln in data.decode("utf-8").splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty castemb-jsonl file")
    header = json.loads(lines[0])
    if header.get("format") != "castemb-jsonl":
        raise DataError(f'{path}: first line must declare "format": "castemb-jsonl"')
    if header.get("version") != VERSION:
        raise DataError(f"{path}: unsupported version {header.get('version')}")
    dim = int(header["dim"])
    n_docs = int(header["n_docs"])
    n_occ = int(header["n_occurrences"])
    if len(lines) != 1 + n_docs + n_occ:
        raise DataError(
            f"{path}: expected {1 + n_docs + n_occ} lines "
            f"(header + {n_docs} docs + {n_occ} occurrences), found {len(lines)}"
        )
    doc_embeddings = np.array(
        [json.loads(ln)["doc_embedding"] for ln in lines[1 : 1 + n_docs]], dtype=np.float32
    ).reshape(n_docs, dim)
    occ_words, occ_doc_ids, occ_vectors = [], [], []
    for ln in lines[1 + n_docs :]:
        rec = json.loads(ln)
        occ_words.append(rec["word"])
        occ_doc_ids.append(rec["doc_id"])
        occ_vectors.append(rec["vector"])
    occ_arr = np.array(occ_vectors, dtype=np.float32).reshape(n_occ, dim)
    try:
        return EmbeddingStore(dim, doc_embeddings, occ_words, occ_doc_ids, occ_arr)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from exc


def write_castemb_jsonl(store: EmbeddingStore, path: str | Path) -> None:
    """Write the JSON-lines debug variant (for hand-editable fixtures)."""
    store.validate()
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "format": "castemb-jsonl",
            "version": VERSION,
            "dim": store.dim,
            "n_docs": store.n_docs,
            "n_occurrences": store.n_occurrences,
        }
        fh.write(json.dumps(header) + "\n")
        for row in store.doc_embeddings:
            fh.write(json.dumps({"doc_embedding": [float(x) for x in row]}) + "\n")
        for i, word in enumerate(store.occ_words):
            rec = {
                "doc_id": int(store.occ_doc_ids[i]),
                "word": word,
                "vector": [float(x) for x in store.occ_vectors[i]],
            }
            fh.write(json.dumps(rec) + "\n")


# ---------------------------------------------------------------------------
# Deterministic synthetic provider
# ---------------------------------------------------------------------------

def _derived_rng(seed: int, label: bytes) -> np.random.Generator:
    key = int(seed).to_bytes(8, "little", signed=False)
    digest = hashlib.blake2b(label, digest_size=8, key=key).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))


def _word_base_vector(word: str, dim: int, seed: int) -> np.ndarray:
    rng = _derived_rng(seed, b"cast-synth-word:" + word.encode("utf-8"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _topic_anchors(n_topics: int, dim: int, seed: int) -> np.ndarray:
    if n_topics > dim:
        raise ValueError(f"topic_plan needs at most dim={dim} topics, got {n_topics}")
    rng = _derived_rng(seed, b"cast-synth-anchors")
    gaussian = rng.standard_normal((dim, n_topics))
    q, _ = np.linalg.qr(gaussian)
    anchors = q[:, :n_topics].T
    # fix each anchor's sign so the result does not depend on QR conventions
    for t in range(n_topics):
        lead = anchors[t, np.argmax(np.abs(anchors[t]))]
        if lead < 0:
            anchors[t] = -anchors[t]
    return anchors


def synthetic_provider(
    docs: Sequence[Document],
    dim: int,
    seed: int,
    topic_plan: Mapping[str, int] | None = None,
    noise_scale: float = 0.05,
    word_spread: float = 0.25,
) -> EmbeddingStore:
    """Build a deterministic store from a corpus, without any encoder.

    Each word gets a hash-derived unit base vector; occurrence vectors are
    the base plus seeded direction noise of length ``noise_scale``; a
    document embedding is the normalized mean of its occurrence vectors.
    With ``topic_plan`` (word -> topic index), planned words are pulled
    toward orthonormal per-topic anchors, giving planted clusters. Output
    is byte-identical for identical inputs.
    """
    if dim < 8:
        raise ValueError(f"dim must be >= 8, got {dim}")
    if [doc.id for doc in docs] != list(range(len(docs))):
        raise ValueError("document ids must be dense 0..N-1 in order")

    anchors = None
    if topic_plan:
        topics = sorted(set(topic_plan.values()))
        if topics != list(range(len(topics))):
            raise ValueError("topic_plan indices must be dense 0..T-1")
        anchors = _topic_anchors(len(topics), dim, seed)

    base_cache: dict[str, np.ndarray] = {}

    def base_for(word: str) -> np.ndarray:
        cached = base_cache.get(word)
        if cached is None:
            hashed = _word_base_vector(word, dim, seed)
            if anchors is not None and topic_plan is not None and word in topic_plan:
                mixed = anchors[topic_plan[word]] + word_spread * hashed
                cached = mixed / np.linalg.norm(mixed)
            else:
                cached = hashed
            base_cache[word] = cached
        return cached

    noise_rng = _derived_rng(seed, b"cast-synth-noise")
    occ_words: list[str] = []
    occ_doc_ids: list[int] = []
    occ_rows: list[np.ndarray] = []
    doc_rows = np.empty((len(docs), dim), dtype=np.float32)
    empty_docs = []

    for doc in docs:
        if not doc.tokens:
            g = noise_rng.standard_normal(dim)
            doc_rows[doc.id] = (g / np.linalg.norm(g)).astype(np.float32)
            empty_docs.append(doc.id)
            continue
        start = len(occ_rows)
        for tok in doc.tokens:
            vec = base_for(tok)
            if noise_scale > 0.0:
                direction = noise_rng.standard_normal(dim)
                vec = vec + noise_scale * (direction / np.linalg.norm(direction))
                vec = vec / np.linalg.norm(vec)
            occ_words.append(tok)
            occ_doc_ids.append(doc.id)
            occ_rows.append(vec.astype(np.float32))
        mean = np.mean(
            np.asarray(occ_rows[start:], dtype=np.float32).astype(np.float64), axis=0
        )
        doc_rows[doc.id] = (mean / np.linalg.norm(mean)).astype(np.float32)

    if empty_docs:
        logger.warning(
            "synthetic provider: %d empty documents got random unit embeddings: %s",
            len(empty_docs),
            empty_docs[:10],
        )

    occ_arr = (
        np.stack(occ_rows) if occ_rows else np.zeros((0, dim), dtype=np.float32)
    )
    return EmbeddingStore(dim, doc_rows, occ_words, np.array(occ_doc_ids, dtype=np.uint64), occ_arr)

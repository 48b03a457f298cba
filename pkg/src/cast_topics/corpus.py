"""Corpus loading, tokenization and vocabulary construction.

Documents are kept aligned with externally supplied embeddings by dense
integer ids, so empty documents are retained (with empty token lists)
rather than dropped.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import DataError

DEFAULT_MIN_TOKEN_LEN = 2
DEFAULT_MIN_WORD_FREQ = 3

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class Document:
    """One input document: raw text plus its token list.

    ``id`` is the dense 0..N-1 index used to join with document
    embeddings; ``tokens`` may be empty (the document is still kept).
    """

    id: int
    raw_text: str
    tokens: tuple[str, ...]

    @property
    def is_empty(self) -> bool:
        return len(self.tokens) == 0


@dataclass
class Vocabulary:
    """Word -> (corpus_frequency, document_frequency), plus optional stopwords.

    Stopword filtering is opt-in: the pipeline is expected to work with an
    empty stopword set, so ``stopwords`` defaults to the empty set.
    """

    entries: dict[str, tuple[int, int]] = field(default_factory=dict)
    stopwords: frozenset[str] = frozenset()

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def corpus_frequency(self, word: str) -> int:
        return self.entries[word][0]

    def document_frequency(self, word: str) -> int:
        return self.entries[word][1]

    def words(self) -> list[str]:
        return sorted(self.entries)


def tokenize(raw_text: str, min_token_len: int = DEFAULT_MIN_TOKEN_LEN) -> list[str]:
    """Split text into lowercase word tokens.

    Splits on non-alphanumeric boundaries (Unicode-aware, underscores
    also split), lowercases, drops digits-only tokens and tokens shorter
    than ``min_token_len``.
    """
    tokens = []
    for match in _TOKEN_RE.finditer(raw_text):
        tok = match.group().lower()
        if len(tok) < min_token_len:
            continue
        if all(unicodedata.category(ch) == "Nd" for ch in tok):
            continue
        tokens.append(tok)
    return tokens


def load_corpus(
    path: str | Path,
    format: str = "auto",
    min_token_len: int = DEFAULT_MIN_TOKEN_LEN,
) -> list[Document]:
    """Load documents from a plain-lines or JSON-lines file.

    ``format`` is one of ``plain-lines`` (one document per line),
    ``jsonl`` (one JSON object per line with a ``"text"`` string field),
    or ``auto`` (jsonl iff the file name ends in ``.jsonl``). Ids are
    assigned in input order.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    if format == "auto":
        format = "jsonl" if path.suffix == ".jsonl" else "plain-lines"
    if format not in ("plain-lines", "jsonl"):
        raise ValueError(f"unknown corpus format: {format!r}")

    try:
        raw_lines = path.read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise DataError(f"corpus file {path} is not valid UTF-8: {exc}") from exc

    docs: list[Document] = []
    for lineno, line in enumerate(raw_lines, start=1):
        if format == "plain-lines":
            text = line
        else:
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON record: {exc}") from exc
            if not isinstance(record, dict) or not isinstance(record.get("text"), str):
                raise DataError(f'{path}:{lineno}: record has no string "text" field')
            text = record["text"]
        docs.append(
            Document(
                id=len(docs),
                raw_text=text,
                tokens=tuple(tokenize(text, min_token_len=min_token_len)),
            )
        )
    return docs


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a one-word-per-line UTF-8 stopword file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"stopword file not found: {path}")
    words = {line.strip().lower() for line in path.read_text(encoding="utf-8").splitlines()}
    return frozenset(w for w in words if w)


def build_vocabulary(
    docs: Iterable[Document],
    min_word_freq: int = DEFAULT_MIN_WORD_FREQ,
    stopwords: frozenset[str] = frozenset(),
) -> Vocabulary:
    """Count word frequencies and keep words seen at least ``min_word_freq`` times.

    Corpus frequency counts every occurrence; document frequency counts
    documents containing the word at least once. Stopwords are removed
    after counting.
    """
    if min_word_freq < 1:
        raise ValueError(f"min_word_freq must be >= 1, got {min_word_freq}")
    corpus_freq: dict[str, int] = {}
    doc_freq: dict[str, int] = {}
    for doc in docs:
        for tok in doc.tokens:
            corpus_freq[tok] = corpus_freq.get(tok, 0) + 1
        for tok in set(doc.tokens):
            doc_freq[tok] = doc_freq.get(tok, 0) + 1
    entries = {
        w: (cf, doc_freq[w])
        for w, cf in corpus_freq.items()
        if cf >= min_word_freq and w not in stopwords
    }
    return Vocabulary(entries=entries, stopwords=stopwords)

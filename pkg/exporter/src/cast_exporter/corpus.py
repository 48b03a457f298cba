"""Corpus reading and word-span tokenization.

The tokenizer mirrors the consumer side's rules exactly (split on
non-alphanumeric boundaries, lowercase, drop digits-only tokens and
tokens shorter than two characters) and additionally reports each word's
character span, which the encoder-side alignment needs.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path

MIN_TOKEN_LEN = 2

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class WordSpan:
    word: str  # lowercased
    start: int
    end: int


def word_spans(raw_text: str) -> list[WordSpan]:
    spans = []
    for match in _TOKEN_RE.finditer(raw_text):
        token = match.group().lower()
        if len(token) < MIN_TOKEN_LEN:
            continue
        if all(unicodedata.category(ch) == "Nd" for ch in token):
            continue
        spans.append(WordSpan(token, match.start(), match.end()))
    return spans


def tokenize(raw_text: str) -> list[str]:
    return [span.word for span in word_spans(raw_text)]


def load_corpus_texts(path: str | Path, format: str = "auto") -> list[str]:
    """Raw document texts from a plain-lines or JSON-lines file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    if format == "auto":
        format = "jsonl" if path.suffix == ".jsonl" else "plain-lines"
    lines = path.read_text(encoding="utf-8").splitlines()
    if format == "plain-lines":
        return lines
    texts = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        record = json.loads(line)
        if not isinstance(record, dict) or not isinstance(record.get("text"), str):
            raise ValueError(f'{path}:{lineno}: record has no string "text" field')
        texts.append(record["text"])
    return texts

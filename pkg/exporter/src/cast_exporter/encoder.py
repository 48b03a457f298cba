"""Transformer inference: per-occurrence subword pooling and document
embeddings, streamed into a CASTEMB payload.

Each word found by the span tokenizer is aligned to the encoder's
subword tokens through the offset mapping; its occurrence vector is the
L2-normalized element-wise mean of those subwords' last-layer states.
Words the encoder truncated away or could not be aligned cleanly are
skipped and counted, never guessed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .castemb import CastembPayload
from .corpus import load_corpus_texts, word_spans

logger = logging.getLogger(__name__)

DEFAULT_MAX_SEQ_LEN = 256
DEFAULT_BATCH_SIZE = 16


@dataclass(frozen=True)
class ExportJob:
    corpus_path: str
    model_id: str
    output_path: str
    corpus_format: str = "auto"
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN
    batch_size: int = DEFAULT_BATCH_SIZE
    device: str = "cpu"


@dataclass
class ExportStats:
    n_docs: int = 0
    n_occurrences: int = 0
    skipped_truncated: int = 0
    skipped_misaligned: int = 0
    empty_docs: list[int] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "n_docs": self.n_docs,
            "n_occurrences": self.n_occurrences,
            "skipped_truncated": self.skipped_truncated,
            "skipped_misaligned": self.skipped_misaligned,
            "empty_docs": len(self.empty_docs),
        }


def _unit(vec: np.ndarray) -> np.ndarray:
    return (vec / np.linalg.norm(vec)).astype(np.float32)


def _pool_document(hidden: np.ndarray, usable: np.ndarray, attended: np.ndarray) -> np.ndarray:
    rows = hidden[usable] if usable.any() else hidden[attended]
    return _unit(rows.mean(axis=0))


def export(job: ExportJob) -> tuple[CastembPayload, ExportStats]:
    """Encode the corpus and return the payload plus skip counters.

    The payload is also written to ``job.output_path``.
    """
    texts = load_corpus_texts(job.corpus_path, job.corpus_format)
    tokenizer = AutoTokenizer.from_pretrained(job.model_id)
    model = AutoModel.from_pretrained(job.model_id)
    model.to(job.device)
    model.eval()

    dim = int(model.config.hidden_size)
    doc_rows = np.empty((len(texts), dim), dtype=np.float32)
    payload = CastembPayload(dim=dim, doc_embeddings=doc_rows)
    stats = ExportStats(n_docs=len(texts))

    for batch_start in range(0, len(texts), job.batch_size):
        batch = texts[batch_start : batch_start + job.batch_size]
        encoded = tokenizer(
            batch,
            truncation=True,
            max_length=job.max_seq_len,
            padding=True,
            return_offsets_mapping=True,
            return_special_tokens_mask=True,
            return_tensors="pt",
        )
        with torch.no_grad():
            output = model(
                input_ids=encoded["input_ids"].to(job.device),
                attention_mask=encoded["attention_mask"].to(job.device),
            )
        hidden_batch = output.last_hidden_state.cpu().numpy().astype(np.float64)

        for local, text in enumerate(batch):
            doc_id = batch_start + local
            hidden = hidden_batch[local]
            offsets = encoded["offset_mapping"][local].numpy()
            attended = encoded["attention_mask"][local].numpy().astype(bool)
            special = encoded["special_tokens_mask"][local].numpy().astype(bool)
            usable = attended & ~special

            doc_rows[doc_id] = _pool_document(hidden, usable, attended)

            spans = word_spans(text)
            if not spans:
                stats.empty_docs.append(doc_id)
                continue
            kept_end = int(offsets[usable, 1].max()) if usable.any() else 0
            for span in spans:
                inside = usable & (offsets[:, 0] < span.end) & (offsets[:, 1] > span.start)
                if not inside.any():
                    if span.start >= kept_end:
                        stats.skipped_truncated += 1
                    else:
                        stats.skipped_misaligned += 1
                    continue
                if offsets[inside, 0].min() < span.start or offsets[inside, 1].max() > span.end:
                    stats.skipped_misaligned += 1
                    continue
                payload.add_occurrence(span.word, doc_id, _unit(hidden[inside].mean(axis=0)))
                stats.n_occurrences += 1

    if stats.empty_docs:
        logger.warning("%d documents produced no word spans", len(stats.empty_docs))
    if stats.skipped_truncated or stats.skipped_misaligned:
        logger.warning(
            "skipped %d truncated and %d misaligned word occurrences",
            stats.skipped_truncated,
            stats.skipped_misaligned,
        )

    payload.write(job.output_path)
    return payload, stats

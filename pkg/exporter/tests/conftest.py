"""Shared helpers: a tiny locally-built encoder and the consumer CLI."""

from __future__ import annotations

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

EXPORTER_ROOT = Path(__file__).resolve().parent.parent
CONSUMER_SRC = EXPORTER_ROOT.parent / "src"

SAMPLE_TEXTS = [
    "the satellite reached a stable orbit",
    "markets closed higher on trade hopes",
    "the rover drilled into the crater floor",
    "investors weighed the quarterly earnings",
    "a comet passed close to the station",
    "the bank raised its lending forecast",
    "engineers tested the landing thrusters",
    "shares of the retailer fell sharply",
    "the telescope captured a distant nebula",
    "analysts expect slower consumer spending",
    "happiness is a warm solar panel",
    "the startup priced its public offering",
    "mission control confirmed the docking",
    "the currency weakened against exports",
    "astronauts unpacked the cargo module",
    "regulators reviewed the merger filing",
    "the probe measured the magnetic field",
    "lenders tightened credit standards",
    "the crew calibrated the spectrometer",
    "futures slipped before the report",
]


def run_consumer_cli(args: list[str]) -> subprocess.CompletedProcess:
    """Invoke the consumer's `cast` CLI (its public interface)."""
    env = dict(os.environ)
    env["PYTHONPATH"] = str(CONSUMER_SRC) + os.pathsep + env.get("PYTHONPATH", "")
    return subprocess.run(
        [sys.executable, "-m", "cast_topics", *args],
        capture_output=True,
        text=True,
        env=env,
    )


@pytest.fixture(scope="session")
def tiny_encoder(tmp_path_factory) -> Path:
    """A small randomly initialized encoder with a WordPiece tokenizer
    covering the sample corpus, saved locally so no network is needed."""
    import torch
    from tokenizers import Tokenizer, normalizers, pre_tokenizers
    from tokenizers.models import WordPiece
    from tokenizers.processors import TemplateProcessing
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    words = sorted({w for text in SAMPLE_TEXTS for w in text.lower().split()})
    # force multi-subword splits for a few words to exercise span pooling
    pieces = ["happi", "##ness", "satell", "##ite", "tele", "##scope"]
    whole = [w for w in words if w not in ("happiness", "satellite", "telescope")]
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", *pieces, *whole]

    backend = Tokenizer(WordPiece({t: i for i, t in enumerate(vocab)}, unk_token="[UNK]"))
    backend.normalizer = normalizers.Lowercase()
    backend.pre_tokenizer = pre_tokenizers.Whitespace()
    backend.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        special_tokens=[("[CLS]", vocab.index("[CLS]")), ("[SEP]", vocab.index("[SEP]"))],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=backend,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )

    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(1234)
    model = BertModel(config)

    model_dir = tmp_path_factory.mktemp("tiny-encoder")
    tokenizer.save_pretrained(model_dir)
    model.save_pretrained(model_dir)
    return model_dir


@pytest.fixture()
def sample_corpus(tmp_path) -> Path:
    path = tmp_path / "sample.jsonl"
    path.write_text("".join(json.dumps({"text": t}) + "\n" for t in SAMPLE_TEXTS))
    return path

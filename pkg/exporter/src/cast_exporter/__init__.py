"""Offline embedding export for the CASTEMB-consuming topic modeller."""

from .castemb import CastembPayload
from .corpus import load_corpus_texts, tokenize, word_spans
from .encoder import ExportJob, ExportStats, export
from .mock import export_mock

__version__ = "0.1.0"

__all__ = [
    "CastembPayload",
    "ExportJob",
    "ExportStats",
    "export",
    "export_mock",
    "load_corpus_texts",
    "tokenize",
    "word_spans",
]

"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cast_topics import Document, tokenize

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).resolve().parent / "fixtures"

# corpus shared with the exporter's byte-conformance contract; keep in sync
# with exporter/tests/test_conformance.py
CONFORMANCE_TEXTS = [
    "the solar probe drifted past the corona",
    "market futures rallied on export data",
    "the corona probe sent solar telemetry",
    "export tariffs shook the futures market",
    "",
]
CONFORMANCE_SHA256 = "7dd6588272173e9ffce720956235d3615585c269656bb342cf3249586b2d2ddd"


def make_documents(texts: list[str]) -> list[Document]:
    return [
        Document(id=i, raw_text=t, tokens=tuple(tokenize(t))) for i, t in enumerate(texts)
    ]


def make_planted_corpus(
    n_topics: int = 3,
    docs_per_topic: int = 200,
    words_per_topic: int = 30,
    tokens_per_doc: int = 12,
    seed: int = 0,
) -> tuple[list[Document], dict[str, int], np.ndarray]:
    """Corpus with disjoint per-topic vocabularies; returns (docs,
    word->topic plan, ground-truth topic per document)."""
    rng = np.random.default_rng(seed)
    vocab = {
        t: [f"t{t}w{i:02d}" for i in range(words_per_topic)] for t in range(n_topics)
    }
    plan = {w: t for t, words in vocab.items() for w in words}
    docs, truth = [], []
    for d in range(n_topics * docs_per_topic):
        t = d % n_topics
        words = rng.choice(vocab[t], size=tokens_per_doc, replace=True)
        text = " ".join(words)
        docs.append(Document(id=d, raw_text=text, tokens=tuple(tokenize(text))))
        truth.append(t)
    return docs, plan, np.array(truth)


def write_corpus_jsonl(docs: list[Document], path: Path) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"text": doc.raw_text}) + "\n")
    return path


def cluster_purity(labels: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of points whose cluster's majority ground truth matches;
    noise points count against purity."""
    correct = 0
    for c in np.unique(labels):
        if c == -1:
            continue
        members = truth[labels == c]
        correct += int(np.bincount(members).max())
    return correct / len(labels)


def run_cli(args: list[str], cwd: Path | None = None) -> subprocess.CompletedProcess:
    env = dict(os.environ)
    env["PYTHONPATH"] = str(REPO_ROOT / "src") + os.pathsep + env.get("PYTHONPATH", "")
    return subprocess.run(
        [sys.executable, "-m", "cast_topics", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
        env=env,
    )


@pytest.fixture
def planted_small():
    """3 topics x 60 docs: big enough to cluster, fast enough for unit tests."""
    return make_planted_corpus(docs_per_topic=60, seed=11)


# ---------------------------------------------------------------------------
# acceptance reporting: one pass/fail line per criterion at session end
# ---------------------------------------------------------------------------

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def record_acceptance(name: str, outcome: str) -> None:
    _ACCEPTANCE_RESULTS[name] = outcome


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or "test_acceptance" not in str(item.fspath):
        return
    criterion = item.function.__doc__ or item.name
    _ACCEPTANCE_RESULTS[criterion.strip().splitlines()[0]] = (
        "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    )


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"[{outcome}] {name}")

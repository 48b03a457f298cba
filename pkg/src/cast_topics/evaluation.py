"""Coherence and diversity metrics, plus an optional LLM judge.

Co-occurrence probabilities come from boolean sliding windows over the
reference corpus (stride 1; a document shorter than the window is one
window). Pair scores are normalized pointwise mutual information clamped
to [-1, 1]; pairs that never co-occur score -1, the limiting value.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import Document
from .errors import DataError, ExternalServiceError

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_SIZE = 10
DEFAULT_EPSILON = 1e-12
API_KEY_ENV = "CAST_LLM_API_KEY"


@dataclass
class EvalReport:
    npmi_per_topic: list[float]
    npmi_mean: float
    topic_diversity: float
    params: dict
    llm_tc: float | None = None
    llm_td: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "npmi_per_topic": self.npmi_per_topic,
            "npmi_mean": self.npmi_mean,
            "topic_diversity": self.topic_diversity,
            "llm_tc": self.llm_tc,
            "llm_td": self.llm_td,
            "params": self.params,
        }

    def render_text(self) -> str:
        lines = [
            f"npmi_mean        {self.npmi_mean:+.4f}",
            f"topic_diversity  {self.topic_diversity:.4f}",
        ]
        if self.llm_tc is not None:
            lines.append(f"llm_tc           {self.llm_tc:.2f}")
        if self.llm_td is not None:
            lines.append(f"llm_td           {self.llm_td:.2f}")
        for i, score in enumerate(self.npmi_per_topic):
            lines.append(f"  topic {i:<3d}      {score:+.4f}")
        return "\n".join(lines)


def iter_windows(tokens: Sequence[str], window_size: int):
    """Boolean sliding windows: stride 1, one window for short documents."""
    if len(tokens) <= window_size:
        yield frozenset(tokens)
        return
    for start in range(len(tokens) - window_size + 1):
        yield frozenset(tokens[start : start + window_size])


def _window_counts(
    reference: Sequence[Document], tracked: set[str], window_size: int
) -> tuple[dict[str, int], dict[tuple[str, str], int], int]:
    word_counts: dict[str, int] = {w: 0 for w in tracked}
    pair_counts: dict[tuple[str, str], int] = {}
    n_windows = 0
    for doc in reference:
        for window in iter_windows(doc.tokens, window_size):
            n_windows += 1
            present = sorted(window & tracked)
            for w in present:
                word_counts[w] += 1
            for a, b in itertools.combinations(present, 2):
                pair_counts[(a, b)] = pair_counts.get((a, b), 0) + 1
    return word_counts, pair_counts, n_windows


def _pair_npmi(
    ci: int, cj: int, cij: int, n_windows: int, epsilon: float
) -> float:
    if ci == 0 or cj == 0:
        return -1.0
    if cij == 0:
        # limiting value as the smoothing vanishes
        return -1.0
    p_i = ci / n_windows
    p_j = cj / n_windows
    p_ij = cij / n_windows
    denominator = -math.log(p_ij + epsilon)
    if denominator <= 0.0:
        # both words in every window: perfectly associated
        return 1.0
    value = math.log((p_ij + epsilon) / (p_i * p_j)) / denominator
    return min(1.0, max(-1.0, value))


def npmi(
    topics: Sequence[Sequence[str]],
    reference_corpus: Sequence[Document],
    window_size: int = DEFAULT_WINDOW_SIZE,
    epsilon: float = DEFAULT_EPSILON,
) -> tuple[list[float], float]:
    """Per-topic and mean coherence over each topic's word pairs."""
    if not reference_corpus:
        raise DataError("empty reference corpus")
    for i, topic in enumerate(topics):
        if len(topic) < 2:
            raise DataError(f"topic {i} has {len(topic)} words; need >= 2 for pair scores")
    if window_size < 1:
        raise ValueError(f"window_size must be >= 1, got {window_size}")

    tracked = {w for topic in topics for w in topic}
    word_counts, pair_counts, n_windows = _window_counts(
        reference_corpus, tracked, window_size
    )

    per_topic = []
    for topic in topics:
        scores = []
        for a, b in itertools.combinations(topic, 2):
            key = (a, b) if a <= b else (b, a)
            scores.append(
                _pair_npmi(
                    word_counts[a],
                    word_counts[b],
                    pair_counts.get(key, 0),
                    n_windows,
                    epsilon,
                )
            )
        per_topic.append(sum(scores) / len(scores))
    return per_topic, sum(per_topic) / len(per_topic)


def topic_diversity(topics: Sequence[Sequence[str]]) -> float:
    """Fraction of unique words across all topics' top-k lists."""
    if not topics:
        raise DataError("no topics to score")
    top_k = len(topics[0])
    if top_k == 0:
        raise DataError("topics have no words")
    ragged = [i for i, t in enumerate(topics) if len(t) != top_k]
    if ragged:
        raise DataError(
            f"topic diversity is undefined for ragged topic lists "
            f"(topics {ragged} differ from top_k={top_k})"
        )
    unique = {w for t in topics for w in t}
    return len(unique) / (len(topics) * top_k)


# ---------------------------------------------------------------------------
# LLM judge
# ---------------------------------------------------------------------------

COHERENCE_PROMPT_TEMPLATE = """I will provide you with sets of clusters, where each cluster is described by a list of keywords: [topic_words]. For each set, evaluate the topic coherence of the clusters based on how interpretable and meaningful the keyword lists are for representing and retrieving distinct topics or subjects. Use this 4-point rating scale:

4 = Keywords are highly coherent and clearly represent a specific, well-defined topic
3 = Keywords are reasonably coherent and suggest a relatively distinct topic
2 = Keywords lack coherence and make the topic difficult to interpret
1 = Keywords are essentially random and meaningless for defining any topic

For each cluster set, provide: The cluster number and your rating score, along with a 1-2 sentence explanation, in this format:

Cluster [X]: [score] - [brief explanation]

Then calculate and provide the average cluster score as the "Topic Coherence Score" for that set.
"""

DIVERSITY_PROMPT_TEMPLATE = """I will provide you with sets of clusters, where each cluster is described by a list of keywords: [topic_words]. Evaluate the diversity of topics represented across all the clusters in each set on a 4-point rating scale:

4 = Extremely diverse topics (clusters cover a very wide range of completely distinct and unrelated topics)
3 = High topic diversity (clusters cover many distinct topics with little overlap)
2 = Moderate topic diversity (clusters cover some distinct topics but also significant overlap)
1 = Low topic diversity (clusters cover highly repetitive clusters with very little distinction in topics covered)

For each set, provide your score along with a brief explanation justifying the rating. The response should be in the following format:
Set [name]: [score] [Explanation]
"""


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str
    model: str = "gpt-4"
    timeout: float = 60.0
    max_retries: int = 2  # retries after the first attempt
    backoff: float = 0.5
    api_key_env: str = API_KEY_ENV


@dataclass
class LlmJudgeResult:
    llm_tc: float
    llm_td: float
    transcripts: list[dict] = field(default_factory=list)


def format_topic_words(topics: Sequence[Sequence[str]]) -> str:
    return "\n".join(
        f"Cluster {i + 1}: {', '.join(topic)}" for i, topic in enumerate(topics)
    )


def render_coherence_prompt(topics: Sequence[Sequence[str]]) -> str:
    return COHERENCE_PROMPT_TEMPLATE.replace("[topic_words]", "\n" + format_topic_words(topics) + "\n")


def render_diversity_prompt(topics: Sequence[Sequence[str]]) -> str:
    return DIVERSITY_PROMPT_TEMPLATE.replace("[topic_words]", "\n" + format_topic_words(topics) + "\n")


def parse_cluster_scores(text: str, n_topics: int) -> list[float]:
    """Pull "Cluster [X]: [score]" lines out of a judge response."""
    import re

    scores: dict[int, float] = {}
    for match in re.finditer(
        r"Cluster\s*\[?(\d+)\]?\s*:\s*\[?(\d+(?:\.\d+)?)\]?", text
    ):
        idx = int(match.group(1))
        score = float(match.group(2))
        if not 1.0 <= score <= 4.0:
            raise DataError(f"cluster {idx} score {score} outside the 1-4 scale")
        scores.setdefault(idx, score)
    if len(scores) < n_topics:
        raise DataError(
            f"expected scores for {n_topics} clusters, parsed {len(scores)}"
        )
    return [scores[i] for i in sorted(scores)][:n_topics]


def parse_set_score(text: str) -> float:
    """Pull the single "Set [name]: [score]" line out of a judge response."""
    import re

    match = re.search(r"Set\s*\[?[^\]:\n]*\]?\s*:\s*\[?(\d+(?:\.\d+)?)\]?", text)
    if match is None:
        raise DataError("no 'Set [name]: [score]' line in response")
    score = float(match.group(1))
    if not 1.0 <= score <= 4.0:
        raise DataError(f"set score {score} outside the 1-4 scale")
    return score


def _post_chat(config: LlmConfig, prompt: str) -> str:
    payload = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
    }
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    request = urllib.request.Request(
        config.endpoint, data=json.dumps(payload).encode("utf-8"), headers=headers
    )
    try:
        with urllib.request.urlopen(request, timeout=config.timeout) as response:
            body = json.loads(response.read().decode("utf-8"))
    except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
        raise ExternalServiceError(f"chat endpoint failed: {exc}") from exc
    try:
        return body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ExternalServiceError(f"unexpected chat response shape: {body}") from exc


def llm_judge(
    topics: Sequence[Sequence[str]], config: LlmConfig
) -> LlmJudgeResult:
    """Score coherence (per-cluster, averaged) and diversity (set-level)
    with a chat-completions endpoint; malformed replies are retried up to
    ``config.max_retries`` times and raw transcripts are kept."""
    if not topics:
        raise DataError("no topics to judge")
    transcripts: list[dict] = []

    def ask(kind: str, prompt: str, parse):
        last_error: Exception | None = None
        for attempt in range(config.max_retries + 1):
            if attempt and config.backoff:
                time.sleep(config.backoff * (2 ** (attempt - 1)))
            response = _post_chat(config, prompt)
            transcripts.append(
                {"kind": kind, "attempt": attempt, "prompt": prompt, "response": response}
            )
            try:
                return parse(response)
            except DataError as exc:
                last_error = exc
                logger.warning("unparseable %s response (attempt %d): %s", kind, attempt, exc)
        raise ExternalServiceError(
            f"{kind} response unparseable after {config.max_retries + 1} attempts: "
            f"{last_error}; last transcript: {transcripts[-1]['response']!r}"
        )

    cluster_scores = ask(
        "coherence",
        render_coherence_prompt(topics),
        lambda text: parse_cluster_scores(text, len(topics)),
    )
    set_score = ask("diversity", render_diversity_prompt(topics), parse_set_score)
    return LlmJudgeResult(
        llm_tc=sum(cluster_scores) / len(cluster_scores),
        llm_td=set_score,
        transcripts=transcripts,
    )


def evaluate(
    topics: Sequence[Sequence[str]],
    reference_corpus: Sequence[Document],
    window_size: int = DEFAULT_WINDOW_SIZE,
    epsilon: float = DEFAULT_EPSILON,
    llm_config: LlmConfig | None = None,
) -> EvalReport:
    """NPMI + diversity, with optional LLM judging when configured."""
    per_topic, mean = npmi(topics, reference_corpus, window_size, epsilon)
    diversity = topic_diversity(topics)
    report = EvalReport(
        npmi_per_topic=per_topic,
        npmi_mean=mean,
        topic_diversity=diversity,
        params={
            "top_k": len(topics[0]) if topics else 0,
            "window_size": window_size,
            "epsilon": epsilon,
        },
    )
    if llm_config is not None:
        judged = llm_judge(topics, llm_config)
        report.llm_tc = judged.llm_tc
        report.llm_td = judged.llm_td
    return report

"""Command-line entry point.

Subcommands: model (fit and write model.json plus a topic table), eval
(coherence/diversity of a saved model), ss-report (sorted self-similarity
table), ablate (threshold sweep with repeats), validate (full embeddings
file check). Exit codes: 0 success, 1 data invariant violation, 2
usage or missing input, 3 external service failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .clusterer import ClusterParams
from .corpus import load_corpus, load_stopwords
from .embedding_store import read_castemb
from .errors import CastError, DataError, ExternalServiceError, PipelineError
from .evaluation import (
    DEFAULT_EPSILON,
    DEFAULT_WINDOW_SIZE,
    LlmConfig,
    evaluate,
)
from .reducer import ReduceParams
from .topic_model import FitParams, TopicModel, fit
from .word_aggregation import build_word_profiles, ss_report

_MODEL_DEFAULTS = {
    "input_format": "auto",
    "ss_threshold": 0.4,
    "min_word_freq": 3,
    "stopwords": None,
    "reducer": "umap",
    "n_components": 5,
    "n_neighbors": 15,
    "min_dist": 0.1,
    "epochs": 200,
    "min_cluster_size": 15,
    "min_samples": None,
    "top_k": 10,
    "soft_words": False,
    "out": "model.json",
    "seed": 0,
}

_EVAL_DEFAULTS = {
    "window_size": DEFAULT_WINDOW_SIZE,
    "epsilon": DEFAULT_EPSILON,
    "llm_endpoint": None,
    "llm_model": "gpt-4",
}


def _positive_int(value: str) -> int:
    parsed = int(value)
    if parsed < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return parsed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cast",
        description="Topic modelling from contextualized word embeddings "
        "with self-similarity filtering.",
    )
    parser.add_argument("--format", choices=("text", "json"), default="text")
    parser.add_argument("--quiet", action="store_true")
    parser.add_argument("--config", type=Path, help="JSON file of option values; flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model_options(p: argparse.ArgumentParser) -> None:
        p.add_argument("--input", type=Path, required=True)
        p.add_argument("--input-format", choices=("auto", "plain-lines", "jsonl"))
        p.add_argument("--embeddings", type=Path, required=True)
        p.add_argument("--ss-threshold", type=float)
        p.add_argument("--min-word-freq", type=int)
        p.add_argument("--stopwords", type=Path)
        p.add_argument("--reducer", choices=("umap", "pca"))
        p.add_argument("--n-components", type=int)
        p.add_argument("--n-neighbors", type=int)
        p.add_argument("--min-dist", type=float)
        p.add_argument("--epochs", type=int)
        p.add_argument("--min-cluster-size", type=int)
        p.add_argument("--min-samples", type=int)
        p.add_argument("--top-k", type=int)
        p.add_argument("--soft-words", action="store_const", const=True, default=None)
        p.add_argument("--seed", type=int)

    p_model = sub.add_parser("model", help="fit a topic model")
    add_model_options(p_model)
    p_model.add_argument("--n-topics", type=_positive_int, required=True)
    p_model.add_argument("--out", type=Path)
    p_model.add_argument("--dump-tree", type=Path, help="write the condensed cluster tree as JSON")

    p_eval = sub.add_parser("eval", help="score a saved model")
    p_eval.add_argument("--model", type=Path, required=True)
    p_eval.add_argument("--reference", type=Path, required=True)
    p_eval.add_argument("--reference-format", choices=("auto", "plain-lines", "jsonl"), default="auto")
    p_eval.add_argument("--window-size", type=int)
    p_eval.add_argument("--epsilon", type=float)
    p_eval.add_argument("--llm-endpoint")
    p_eval.add_argument("--llm-model")
    p_eval.add_argument("--out", type=Path)

    p_ss = sub.add_parser("ss-report", help="sorted self-similarity table")
    p_ss.add_argument("--input", type=Path, required=True)
    p_ss.add_argument("--input-format", choices=("auto", "plain-lines", "jsonl"), default="auto")
    p_ss.add_argument("--embeddings", type=Path, required=True)
    p_ss.add_argument("--min-word-freq", type=int, default=3)
    p_ss.add_argument("--thresholds", default="0.5,0.4,0.3")
    p_ss.add_argument("--top", type=int, default=10)

    p_ablate = sub.add_parser("ablate", help="threshold sweep with repeated fits")
    add_model_options(p_ablate)
    p_ablate.add_argument("--n-topics", type=_positive_int, required=True)
    p_ablate.add_argument("--thresholds", default="0,0.2,0.4,0.6,0.8")
    p_ablate.add_argument("--repeats", type=int, default=5)
    p_ablate.add_argument("--window-size", type=int)
    p_ablate.add_argument("--epsilon", type=float)
    p_ablate.add_argument("--out", type=Path)

    p_val = sub.add_parser("validate", help="check an embeddings file")
    p_val.add_argument("embeddings", type=Path)

    return parser


def _resolve(args: argparse.Namespace, config: dict, name: str, defaults: dict):
    flag_value = getattr(args, name, None)
    if flag_value is not None:
        return flag_value
    if name in config:
        return config[name]
    return defaults.get(name)


def _load_config(args: argparse.Namespace) -> dict:
    if args.config is None:
        return {}
    if not args.config.exists():
        raise FileNotFoundError(f"config file not found: {args.config}")
    loaded = json.loads(args.config.read_text(encoding="utf-8"))
    if not isinstance(loaded, dict):
        raise DataError(f"config file {args.config} must hold a JSON object")
    return _normalize_config(loaded)


def _normalize_config(loaded: dict) -> dict:
    """Flatten the nested shape that model artifacts embed, so a recorded
    config can be fed straight back through --config."""
    config = dict(loaded)
    reduce_block = config.pop("reduce", None)
    if isinstance(reduce_block, dict):
        for key in ("n_components", "n_neighbors", "min_dist"):
            config.setdefault(key, reduce_block.get(key))
        config.setdefault("epochs", reduce_block.get("n_epochs"))
    cluster_block = config.pop("cluster", None)
    if isinstance(cluster_block, dict):
        config.setdefault("min_cluster_size", cluster_block.get("min_cluster_size"))
        config.setdefault("min_samples", cluster_block.get("min_samples"))
    if "n_epochs" in config:
        config.setdefault("epochs", config.pop("n_epochs"))
    return {k: v for k, v in config.items() if v is not None}


def _fit_params(args: argparse.Namespace, config: dict) -> FitParams:
    get = lambda name: _resolve(args, config, name, _MODEL_DEFAULTS)
    stopword_source = get("stopwords")
    stopwords: tuple[str, ...] = ()
    if isinstance(stopword_source, list):
        # recorded configs embed the word list itself
        stopwords = tuple(sorted({str(w).lower() for w in stopword_source}))
    elif stopword_source:
        stopwords = tuple(sorted(load_stopwords(stopword_source)))
    seed = int(get("seed"))
    return FitParams(
        n_topics=int(args.n_topics),
        ss_threshold=float(get("ss_threshold")),
        min_word_freq=int(get("min_word_freq")),
        stopwords=stopwords,
        reducer=get("reducer"),
        reduce=ReduceParams(
            n_components=int(get("n_components")),
            n_neighbors=int(get("n_neighbors")),
            min_dist=float(get("min_dist")),
            n_epochs=int(get("epochs")),
            seed=seed,
        ),
        cluster=ClusterParams(
            min_cluster_size=int(get("min_cluster_size")),
            min_samples=(None if get("min_samples") is None else int(get("min_samples"))),
        ),
        top_k=int(get("top_k")),
        soft_words=bool(get("soft_words")),
        seed=seed,
    )


def _load_inputs(args: argparse.Namespace, config: dict):
    input_format = _resolve(args, config, "input_format", _MODEL_DEFAULTS)
    corpus = load_corpus(args.input, format=input_format)
    store = read_castemb(args.embeddings)
    return corpus, store


def render_topic_table(model: TopicModel) -> str:
    """Topics as columns, ranked words as rows."""
    headers = [
        f"topic {t.topic_id} ({len(t.member_doc_ids)} docs)" for t in model.topics
    ]
    columns = [[w for w, _ in t.top_words] for t in model.topics]
    depth = max((len(c) for c in columns), default=0)
    cells = [c + [""] * (depth - len(c)) for c in columns]
    widths = [max([len(h)] + [len(w) for w in col]) for h, col in zip(headers, cells)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in zip(*cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def cmd_model(args: argparse.Namespace) -> int:
    config = _load_config(args)
    corpus, store = _load_inputs(args, config)
    params = _fit_params(args, config)
    started = time.perf_counter()
    model = fit(corpus, store, params)
    elapsed = time.perf_counter() - started

    out = _resolve(args, config, "out", _MODEL_DEFAULTS)
    Path(out).write_text(model.to_json() + "\n", encoding="utf-8")
    if args.dump_tree:
        args.dump_tree.write_text(json.dumps(model.condensed_tree, indent=2) + "\n")
    if args.format == "json":
        print(model.to_json())
    else:
        print(render_topic_table(model))
    if not args.quiet:
        print(f"fit took {elapsed:.2f}s; model written to {out}", file=sys.stderr)
    return 0


def _model_topics_from_file(path: Path) -> list[list[str]]:
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("format") != "cast-model":
        raise DataError(f"{path} is not a model file")
    return [[w for w, _ in t["top_words"]] for t in payload["topics"]]


def cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args)
    topics = _model_topics_from_file(args.model)
    reference = load_corpus(args.reference, format=args.reference_format)
    get = lambda name: _resolve(args, config, name, _EVAL_DEFAULTS)
    llm_config = None
    endpoint = get("llm_endpoint")
    if endpoint:
        llm_config = LlmConfig(endpoint=endpoint, model=get("llm_model"))
    report = evaluate(
        topics,
        reference,
        window_size=int(get("window_size")),
        epsilon=float(get("epsilon")),
        llm_config=llm_config,
    )
    if args.out:
        args.out.write_text(json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n")
    if args.format == "json":
        print(json.dumps(report.to_json_dict(), indent=2, sort_keys=True))
    else:
        print(report.render_text())
    return 0


def cmd_ss_report(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.input, format=args.input_format)
    store = read_castemb(args.embeddings)
    from .corpus import build_vocabulary

    vocab = build_vocabulary(corpus, min_word_freq=args.min_word_freq)
    profiles = build_word_profiles(store, vocab)
    thresholds = _parse_thresholds(args.thresholds)
    report = ss_report(profiles, thresholds=thresholds, top_n=args.top)
    if args.format == "json":
        print(json.dumps(report.to_json_dict(), indent=2, sort_keys=True))
    else:
        print(report.render_text())
    return 0


def _parse_thresholds(spec: str) -> list[float]:
    try:
        values = [float(part) for part in spec.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise DataError(f"bad threshold list {spec!r}: {exc}") from exc
    if not values:
        raise DataError("threshold list is empty")
    bad = [v for v in values if not 0.0 <= v <= 1.0]
    if bad:
        raise DataError(f"thresholds outside [0, 1]: {bad}")
    return values


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    corpus, store = _load_inputs(args, config)
    base = _fit_params(args, config)
    thresholds = _parse_thresholds(args.thresholds)
    if args.repeats < 1:
        raise DataError(f"repeats must be >= 1, got {args.repeats}")
    get = lambda name: _resolve(args, config, name, _EVAL_DEFAULTS)
    window_size = int(get("window_size"))
    epsilon = float(get("epsilon"))

    rows = []
    started = time.perf_counter()
    for threshold in thresholds:
        tc_values, td_values, failures = [], [], []
        for i in range(args.repeats):
            run_params = FitParams(
                n_topics=base.n_topics,
                ss_threshold=threshold,
                min_word_freq=base.min_word_freq,
                stopwords=base.stopwords,
                reducer=base.reducer,
                reduce=base.reduce,
                cluster=base.cluster,
                top_k=base.top_k,
                soft_words=base.soft_words,
                seed=base.seed + i,
            ).with_seed(base.seed + i)
            try:
                model = fit(corpus, store, run_params)
                report = evaluate(
                    model.top_words_per_topic(),
                    corpus,
                    window_size=window_size,
                    epsilon=epsilon,
                )
            except (PipelineError, DataError) as exc:
                failures.append(str(exc))
                continue
            tc_values.append(report.npmi_mean)
            td_values.append(report.topic_diversity)
        rows.append(
            {
                "threshold": threshold,
                "runs_requested": args.repeats,
                "runs_completed": len(tc_values),
                "tc_mean": (sum(tc_values) / len(tc_values)) if tc_values else None,
                "td_mean": (sum(td_values) / len(td_values)) if td_values else None,
                "insufficient_candidates": bool(failures),
                "failures": failures,
            }
        )
    elapsed = time.perf_counter() - started

    payload = {
        "config": {**base.to_json_dict(), "thresholds": thresholds, "repeats": args.repeats},
        "rows": rows,
    }
    if args.out:
        args.out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"{'threshold':>9}  {'TC':>8}  {'TD':>6}  {'runs':>5}  note")
        for row in rows:
            tc = "-" if row["tc_mean"] is None else f"{row['tc_mean']:+.4f}"
            td = "-" if row["td_mean"] is None else f"{row['td_mean']:.4f}"
            note = "insufficient candidates" if row["insufficient_candidates"] else ""
            print(
                f"{row['threshold']:>9g}  {tc:>8}  {td:>6}  "
                f"{row['runs_completed']:>2}/{row['runs_requested']:<2}  {note}".rstrip()
            )
    if not args.quiet:
        print(f"sweep took {elapsed:.2f}s", file=sys.stderr)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    store = read_castemb(args.embeddings)
    stats = store.norm_stats()
    summary = {
        "dim": store.dim,
        "n_docs": store.n_docs,
        "n_occurrences": store.n_occurrences,
        **stats,
    }
    if args.format == "json":
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        for key, value in summary.items():
            print(f"{key}: {value}")
    return 0


_COMMANDS = {
    "model": cmd_model,
    "eval": cmd_eval,
    "ss-report": cmd_ss_report,
    "ablate": cmd_ablate,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExternalServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DataError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points: cast-export (real encoder) and
cast-export-mock (deterministic synthetic twin)."""

from __future__ import annotations

import argparse
import json
import sys
import time

from .corpus import load_corpus_texts
from .encoder import DEFAULT_BATCH_SIZE, DEFAULT_MAX_SEQ_LEN, ExportJob, export
from .mock import DEFAULT_NOISE_SCALE, export_mock


def main_export(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cast-export",
        description="Encode a corpus with a transformer and write a CASTEMB file.",
    )
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--corpus-format", choices=("auto", "plain-lines", "jsonl"), default="auto")
    parser.add_argument("--model", required=True, help="encoder id or local path")
    parser.add_argument("--max-len", type=int, default=DEFAULT_MAX_SEQ_LEN)
    parser.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--out", required=True)
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    job = ExportJob(
        corpus_path=args.corpus,
        corpus_format=args.corpus_format,
        model_id=args.model,
        max_seq_len=args.max_len,
        batch_size=args.batch_size,
        device=args.device,
        output_path=args.out,
    )
    started = time.perf_counter()
    try:
        _, stats = export(job)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - started
    print(json.dumps(stats.to_json_dict(), indent=2))
    if not args.quiet:
        print(f"export took {elapsed:.2f}s; wrote {args.out}", file=sys.stderr)
    return 0


def main_export_mock(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cast-export-mock",
        description="Write the deterministic synthetic CASTEMB twin of a corpus.",
    )
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--corpus-format", choices=("auto", "plain-lines", "jsonl"), default="auto")
    parser.add_argument("--dim", type=int, default=16)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--noise-scale", type=float, default=DEFAULT_NOISE_SCALE)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)

    try:
        texts = load_corpus_texts(args.corpus, args.corpus_format)
        payload = export_mock(texts, dim=args.dim, seed=args.seed, noise_scale=args.noise_scale)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    payload.write(args.out)
    print(
        json.dumps(
            {
                "n_docs": len(payload.doc_embeddings),
                "n_occurrences": len(payload.occ_words),
                "sha256": payload.sha256(),
            },
            indent=2,
        )
    )
    return 0


if __name__ == "__main__":
    sys.exit(main_export())

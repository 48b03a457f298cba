import json
import struct

import pytest

from cast_topics import synthetic_provider, write_castemb
from tests.conftest import make_planted_corpus, run_cli, write_corpus_jsonl


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Small planted corpus + embeddings on disk for CLI runs."""
    path = tmp_path_factory.mktemp("cli")
    docs, plan, truth = make_planted_corpus(docs_per_topic=40, seed=5)
    write_corpus_jsonl(docs, path / "corpus.jsonl")
    store = synthetic_provider(docs, dim=16, seed=5, topic_plan=plan)
    write_castemb(store, path / "corpus.castemb")
    return path


def model_args(workdir, out="model.json", extra=()):
    return [
        "model",
        "--input", str(workdir / "corpus.jsonl"),
        "--embeddings", str(workdir / "corpus.castemb"),
        "--n-topics", "3",
        "--min-cluster-size", "10",
        "--epochs", "100",
        "--seed", "7",
        "--out", str(workdir / out),
        *extra,
    ]


class TestModel:
    def test_successful_run(self, workdir):
        proc = run_cli(model_args(workdir))
        assert proc.returncode == 0, proc.stderr
        assert (workdir / "model.json").exists()
        assert "topic 0" in proc.stdout
        payload = json.loads((workdir / "model.json").read_text())
        assert payload["format"] == "cast-model"
        assert len(payload["topics"]) == 3
        assert "fit took" in proc.stderr

    def test_missing_embeddings_exit_2(self, workdir):
        proc = run_cli(
            [
                "model",
                "--input", str(workdir / "corpus.jsonl"),
                "--embeddings", str(workdir / "missing.castemb"),
                "--n-topics", "3",
            ]
        )
        assert proc.returncode == 2
        assert "missing.castemb" in proc.stderr

    def test_zero_topics_rejected_before_work(self, workdir):
        proc = run_cli(model_args(workdir, extra=()))
        assert proc.returncode == 0
        bad = run_cli(
            ["model", "--input", "x", "--embeddings", "y", "--n-topics", "0"]
        )
        assert bad.returncode == 2
        assert "n-topics" in bad.stderr

    def test_config_file_with_flag_override(self, workdir):
        config_path = workdir / "run.json"
        config_path.write_text(json.dumps({"ss_threshold": 0.35, "seed": 7, "epochs": 100,
                                           "min_cluster_size": 10}))
        proc = run_cli(
            [
                "--config", str(config_path),
                "model",
                "--input", str(workdir / "corpus.jsonl"),
                "--embeddings", str(workdir / "corpus.castemb"),
                "--n-topics", "3",
                "--out", str(workdir / "cfg.json"),
            ]
        )
        assert proc.returncode == 0, proc.stderr
        payload = json.loads((workdir / "cfg.json").read_text())
        assert payload["config"]["ss_threshold"] == 0.35
        # flag overrides config value
        proc = run_cli(
            [
                "--config", str(config_path),
                *model_args(workdir, out="cfg.json", extra=("--ss-threshold", "0.2")),
            ]
        )
        assert proc.returncode == 0, proc.stderr
        payload = json.loads((workdir / "cfg.json").read_text())
        assert payload["config"]["ss_threshold"] == 0.2

    def test_json_format_prints_model(self, workdir):
        proc = run_cli(["--format", "json", *model_args(workdir, out="j.json")])
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["format"] == "cast-model"

    def test_dump_condensed_tree(self, workdir):
        proc = run_cli(
            model_args(workdir, out="t.json", extra=("--dump-tree", str(workdir / "tree.json")))
        )
        assert proc.returncode == 0, proc.stderr
        tree = json.loads((workdir / "tree.json").read_text())
        assert tree and {"parent", "child", "lambda", "child_size"} <= set(tree[0])

    def test_embedded_config_reproduces_model(self, workdir):
        proc = run_cli(model_args(workdir, out="orig.json"))
        assert proc.returncode == 0, proc.stderr
        payload = json.loads((workdir / "orig.json").read_text())
        config_path = workdir / "replay.json"
        config_path.write_text(json.dumps(payload["config"]))
        proc = run_cli(
            [
                "--config", str(config_path),
                "model",
                "--input", str(workdir / "corpus.jsonl"),
                "--embeddings", str(workdir / "corpus.castemb"),
                "--n-topics", "3",
                "--out", str(workdir / "replayed.json"),
            ]
        )
        assert proc.returncode == 0, proc.stderr
        assert (workdir / "replayed.json").read_bytes() == (workdir / "orig.json").read_bytes()


class TestValidate:
    def test_valid_file(self, workdir):
        proc = run_cli(["validate", str(workdir / "corpus.castemb")])
        assert proc.returncode == 0
        assert "n_docs: 120" in proc.stdout

    def test_truncated_file(self, workdir, tmp_path):
        raw = (workdir / "corpus.castemb").read_bytes()
        bad = tmp_path / "trunc.castemb"
        bad.write_bytes(raw[:-7])
        proc = run_cli(["validate", str(bad)])
        assert proc.returncode == 1
        assert "truncated at byte" in proc.stderr

    def test_nan_vector_names_record(self, workdir, tmp_path):
        raw = bytearray((workdir / "corpus.castemb").read_bytes())
        # header: magic(8) u32 version u32 dim u64 n_docs u64 n_occ
        version, dim, n_docs, n_occ = struct.unpack_from("<IIQQ", raw, 8)
        # first occurrence record's vector: after docs block + u64 + u32 + word
        offset = 8 + 24 + n_docs * dim * 4
        _, word_len = struct.unpack_from("<QI", raw, offset)
        vec_off = offset + 12 + word_len
        struct.pack_into("<f", raw, vec_off, float("nan"))
        bad = tmp_path / "nan.castemb"
        bad.write_bytes(bytes(raw))
        proc = run_cli(["validate", str(bad)])
        assert proc.returncode == 1
        assert "record 0" in proc.stderr

    def test_missing_file(self):
        proc = run_cli(["validate", "no-such-file.castemb"])
        assert proc.returncode == 2


class TestSsReport:
    def test_text_output(self, workdir):
        proc = run_cli(
            [
                "ss-report",
                "--input", str(workdir / "corpus.jsonl"),
                "--embeddings", str(workdir / "corpus.castemb"),
                "--thresholds", "0.5,0.4",
            ]
        )
        assert proc.returncode == 0
        assert "threshold=0.5" in proc.stdout

    def test_json_output(self, workdir):
        proc = run_cli(
            [
                "--format", "json",
                "ss-report",
                "--input", str(workdir / "corpus.jsonl"),
                "--embeddings", str(workdir / "corpus.castemb"),
            ]
        )
        assert proc.returncode == 0
        payload = json.loads(proc.stdout)
        assert "top" in payload and "below_threshold" in payload


class TestEval:
    def test_eval_model(self, workdir):
        run_cli(model_args(workdir, out="em.json"))
        proc = run_cli(
            [
                "--format", "json",
                "eval",
                "--model", str(workdir / "em.json"),
                "--reference", str(workdir / "corpus.jsonl"),
            ]
        )
        assert proc.returncode == 0, proc.stderr
        payload = json.loads(proc.stdout)
        assert payload["topic_diversity"] == 1.0
        assert -1.0 <= payload["npmi_mean"] <= 1.0

    def test_dead_llm_endpoint_exit_3(self, workdir):
        run_cli(model_args(workdir, out="em.json"))
        proc = run_cli(
            [
                "eval",
                "--model", str(workdir / "em.json"),
                "--reference", str(workdir / "corpus.jsonl"),
                "--llm-endpoint", "http://127.0.0.1:9/nope",
            ]
        )
        assert proc.returncode == 3

    def test_missing_model_exit_2(self, workdir):
        proc = run_cli(
            ["eval", "--model", "ghost.json", "--reference", str(workdir / "corpus.jsonl")]
        )
        assert proc.returncode == 2


class TestAblate:
    def test_two_threshold_sweep(self, workdir):
        out = workdir / "sweep.json"
        proc = run_cli(
            [
                "--format", "json",
                "ablate",
                "--input", str(workdir / "corpus.jsonl"),
                "--embeddings", str(workdir / "corpus.castemb"),
                "--n-topics", "3",
                "--min-cluster-size", "10",
                "--epochs", "100",
                "--seed", "3",
                "--thresholds", "0.0,0.4",
                "--repeats", "2",
                "--out", str(out),
            ]
        )
        assert proc.returncode == 0, proc.stderr
        payload = json.loads(out.read_text())
        assert len(payload["rows"]) == 2
        for row in payload["rows"]:
            assert row["runs_completed"] == 2
            assert not row["insufficient_candidates"]

    def test_repeats_validated(self, workdir):
        proc = run_cli(
            [
                "ablate",
                "--input", str(workdir / "corpus.jsonl"),
                "--embeddings", str(workdir / "corpus.castemb"),
                "--n-topics", "3",
                "--repeats", "0",
            ]
        )
        assert proc.returncode == 1

    def test_bad_threshold_rejected(self, workdir):
        proc = run_cli(
            [
                "ablate",
                "--input", str(workdir / "corpus.jsonl"),
                "--embeddings", str(workdir / "corpus.castemb"),
                "--n-topics", "3",
                "--thresholds", "0.2,1.7",
            ]
        )
        assert proc.returncode == 1
        assert "outside" in proc.stderr

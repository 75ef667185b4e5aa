import hashlib
import json

import numpy as np
import pytest

from misinfo.cli import run
from misinfo.embeddings import EmbeddingTable, save_embeddings


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))


@pytest.fixture
def corpus_file(tmp_path):
    rng = np.random.default_rng(0)
    records = []
    for i in range(25):
        rel = i % 2 == 0
        if rel:
            thing = f"thing{rng.integers(0, 8)}"
            text = f"{thing} causes cancer"
            anchors = [[0, len(thing)]]
        else:
            text = f"nothing here number{i} at all"
            anchors = []
        records.append({
            "id": f"t{i}", "text": text, "category": "cause",
            "relevant": rel, "anchors": anchors, "misinfo": rel and i % 4 == 0,
        })
    path = tmp_path / "corpus.jsonl"
    write_jsonl(path, records)
    return path


@pytest.fixture
def embeddings_file(tmp_path):
    rng = np.random.default_rng(1)
    vocab = ([f"thing{i}" for i in range(8)]
             + ["causes", "cancer", "nothing", "here", "at", "all",
                "chemotherapy", "radiation", "therapy", "carrot", "juice"]
             + [f"number{i}" for i in range(25)])
    table = EmbeddingTable(dim=8, vocab=vocab,
                           vectors=rng.normal(size=(len(vocab), 8)) * 0.5)
    path = tmp_path / "emb.txt"
    save_embeddings(table, path)
    return path


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert run(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_missing_required_flag(self, capsys):
        assert run(["preprocess", "--in", "x.jsonl"]) == 1

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        out = tmp_path / "o.jsonl"
        assert run(["preprocess", "--in", str(tmp_path / "nope.jsonl"),
                    "--out", str(out)]) == 2

    def test_malformed_record_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "1"}\n')
        assert run(["preprocess", "--in", str(bad),
                    "--out", str(tmp_path / "o.jsonl")]) == 2
        assert "line 1" in capsys.readouterr().err


class TestPreprocess:
    def test_writes_clean_and_tokens(self, tmp_path, corpus_file):
        out = tmp_path / "clean.jsonl"
        assert run(["preprocess", "--in", str(corpus_file), "--out", str(out)]) == 0
        first = json.loads(out.read_text().splitlines()[0])
        assert "clean" in first and "tokens" in first
        assert (tmp_path / "clean.jsonl.meta.json").exists()

    def test_deterministic(self, tmp_path, corpus_file):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        run(["preprocess", "--in", str(corpus_file), "--out", str(a)])
        run(["preprocess", "--in", str(corpus_file), "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestSplit:
    def test_manifest_schema(self, tmp_path, corpus_file):
        out = tmp_path / "split.json"
        assert run(["split", "--in", str(corpus_file), "--out", str(out),
                    "--seed", "7"]) == 0
        manifest = json.loads(out.read_text())
        assert manifest["seed"] == 7
        assert len(manifest["val_ids"]) == 5
        assert len(manifest["train_ids"]) == 20
        assert set(manifest["train_ids"]).isdisjoint(manifest["val_ids"])
        assert "config_digest" in manifest


class TestRelevancePipeline:
    def test_train_eval_roundtrip(self, tmp_path, corpus_file, embeddings_file):
        model = tmp_path / "rel.json"
        code = run(["train-relevance", "--in", str(corpus_file), "--out", str(model),
                    "--mode", "weighted", "--embeddings", str(embeddings_file),
                    "--epochs", "3", "--seed", "5"])
        assert code == 0
        report = tmp_path / "rel_report.json"
        code = run(["eval-relevance", "--in", str(corpus_file), "--model", str(model),
                    "--embeddings", str(embeddings_file), "--out", str(report)])
        assert code == 0
        payload = json.loads(report.read_text())
        assert {"seed", "config_digest", "rows"} <= set(payload)
        for row in payload["rows"]:
            assert {"domain", "mode", "f1", "accuracy", "precision", "recall"} == set(row)
        assert (tmp_path / "rel_report.tsv").exists()
        assert (tmp_path / "rel_report.png").exists()

    def test_training_determinism(self, tmp_path, corpus_file):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        for path in (a, b):
            assert run(["train-relevance", "--in", str(corpus_file), "--out",
                        str(path), "--mode", "tfidf", "--epochs", "2",
                        "--seed", "9"]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestTaggerPipeline:
    def test_train_eval_tag(self, tmp_path, corpus_file, embeddings_file):
        model = tmp_path / "tagger.json"
        code = run(["train-tagger", "--in", str(corpus_file), "--out", str(model),
                    "--variant", "bilstm-crf", "--embeddings", str(embeddings_file),
                    "--epochs", "2", "--lstm-hidden", "4", "--seed", "3"])
        assert code == 0

        report = tmp_path / "tag_report.json"
        code = run(["eval-tagger", "--in", str(corpus_file), "--model", str(model),
                    "--embeddings", str(embeddings_file), "--out", str(report)])
        assert code == 0
        payload = json.loads(report.read_text())
        for row in payload["rows"]:
            assert {"variant", "span_f1", "span_precision", "span_recall",
                    "token_f1", "token_precision", "token_recall",
                    "token_accuracy"} == set(row)
        assert payload["rows"][0]["variant"] == "bilstm_crf"
        assert (tmp_path / "tag_report.png").exists()

        tagged = tmp_path / "tagged.jsonl"
        code = run(["tag", "--in", str(corpus_file), "--model", str(model),
                    "--embeddings", str(embeddings_file), "--out", str(tagged)])
        assert code == 0
        for line in tagged.read_text().splitlines():
            rec = json.loads(line)
            assert set(rec) == {"id", "tags", "anchors"}
            assert all(t in ("B", "I", "O") for t in rec["tags"])

    def test_eval_rerun_byte_identical(self, tmp_path, corpus_file, embeddings_file):
        model = tmp_path / "tagger.json"
        run(["train-tagger", "--in", str(corpus_file), "--out", str(model),
             "--variant", "crf", "--embeddings", str(embeddings_file),
             "--epochs", "2", "--seed", "3"])
        r1 = tmp_path / "r1.json"
        r2 = tmp_path / "r2.json"
        for report in (r1, r2):
            assert run(["eval-tagger", "--in", str(corpus_file), "--model",
                        str(model), "--embeddings", str(embeddings_file),
                        "--out", str(report), "--seed", "3"]) == 0
        assert r1.read_bytes() == r2.read_bytes()
        assert sha(tmp_path / "r1.png") == sha(tmp_path / "r2.png")
        assert sha(tmp_path / "r1.tsv") == sha(tmp_path / "r2.tsv")


class TestDetectCure:
    def test_verdicts(self, tmp_path, embeddings_file):
        corpus = tmp_path / "cures.jsonl"
        write_jsonl(corpus, [
            {"id": "1", "text": "chemotherapy cures cancer", "category": "cure",
             "relevant": True},
            {"id": "2", "text": "carrot juice cures cancer", "category": "cure",
             "relevant": True},
        ])
        out = tmp_path / "verdicts.jsonl"
        assert run(["detect-cure", "--in", str(corpus), "--embeddings",
                    str(embeddings_file), "--out", str(out), "--tau", "0.6"]) == 0
        recs = {json.loads(l)["id"]: json.loads(l) for l in out.read_text().splitlines()}
        assert recs["1"]["verdict"] == "proven_cure_present"
        assert recs["1"]["hits"][0]["score"] == pytest.approx(1.0)
        assert recs["2"]["verdict"] == "misinfo_candidate"
        assert recs["2"]["hits"] == []


class TestKeywords:
    def test_from_tag_output(self, tmp_path):
        tagged = tmp_path / "tagged.jsonl"
        write_jsonl(tagged, [
            {"id": "1", "tags": ["B", "O"], "anchors": ["cannabis"]},
            {"id": "2", "tags": ["B", "O"], "anchors": ["cannabis"]},
            {"id": "3", "tags": ["B", "O"], "anchors": ["chemotherapy"]},
            {"id": "4", "tags": ["O"], "anchors": []},
        ])
        misinfo = tmp_path / "mk.txt"
        misinfo.write_text("cannabis\n")
        out = tmp_path / "kw.json"
        assert run(["keywords", "--in", str(tagged), "--out", str(out),
                    "--k", "2", "--misinfo-keywords", str(misinfo)]) == 0
        payload = json.loads(out.read_text())
        assert payload["top_keywords"][0] == {"keyword": "cannabi", "count": 2}
        assert payload["misinfo_spread"] == pytest.approx(2.0 / 3.0)
        assert (tmp_path / "kw.png").exists()

    def test_from_annotated_corpus(self, tmp_path, corpus_file):
        out = tmp_path / "kw.json"
        assert run(["keywords", "--in", str(corpus_file), "--out", str(out),
                    "--k", "5"]) == 0
        payload = json.loads(out.read_text())
        assert len(payload["top_keywords"]) <= 5
        assert payload["misinfo_spread"] == 0.0  # no misinfo keyword file given


class TestCompare:
    def test_report_and_figure(self, tmp_path):
        corpus = tmp_path / "groups.jsonl"
        records = []
        for i in range(6):
            records.append({"id": f"m{i}", "text": "happy great win today",
                            "category": "cure", "relevant": True, "misinfo": True})
            records.append({"id": f"c{i}", "text": "study data evidence published",
                            "category": "cure", "relevant": True, "misinfo": False})
        write_jsonl(corpus, records)
        lex = tmp_path / "emotions.tsv"
        lex.write_text("joy\thappy\njoy\tgreat\nscience\tstudy\nscience\tdata\n")
        out = tmp_path / "cmp.tsv"
        assert run(["compare", "--in", str(corpus), "--out", str(out),
                    "--lexicons", str(lex)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].split("\t") == ["feature", "mean_misinfo", "mean_correct",
                                        "t", "df", "p", "signed_log_odds",
                                        "significant"]
        assert len(lines) == 3
        payload = json.loads((tmp_path / "cmp.json").read_text())
        rows = {r["feature"]: r for r in payload["rows"]}
        assert rows["emotions:joy"]["signed_log_odds"] > 0
        assert rows["emotions:science"]["signed_log_odds"] < 0
        assert (tmp_path / "cmp.png").exists()


class TestTrainEmbeddings:
    def test_writes_loadable_table(self, tmp_path, corpus_file):
        out = tmp_path / "vec.txt"
        assert run(["train-embeddings", "--in", str(corpus_file), "--out", str(out),
                    "--dim", "8", "--epochs", "1", "--min-count", "1",
                    "--seed", "4"]) == 0
        header = out.read_text().splitlines()[0]
        assert header.endswith(" 8")

    def test_config_file_supplies_defaults(self, tmp_path, corpus_file):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("dim=4\nepochs=1\nmin_count=1\nseed=2\n")
        out = tmp_path / "vec.txt"
        assert run(["train-embeddings", "--in", str(corpus_file), "--out", str(out),
                    "--config", str(cfg)]) == 0
        assert out.read_text().splitlines()[0].endswith(" 4")

"""Acceptance checks. Each test prints one [PASS]/[FAIL] line (visible with
pytest -s); tolerances and runtime budgets are asserted inside the tests."""

import functools
import hashlib
import json
import math
import time

import numpy as np
import pytest

from conftest import (
    brute_force_log_partition,
    brute_force_viterbi,
    finite_difference_max_rel_error,
    make_annotated,
    orthonormal_cure_table,
    two_tailed_p_by_quadrature,
)
from misinfo.cli import run
from misinfo.corpus import Split, spans_to_bio, with_bio_tags
from misinfo.embeddings import (
    EmbeddingTable,
    SkipgramConfig,
    cosine,
    lookup,
    save_embeddings,
    train_skipgram,
)
from misinfo.cure_detect import CureConfig, build_lexicon, detect_cure_anchor
from misinfo.analysis import signed_log_odds, welch_ttest
from misinfo.neural import bce_loss, ffn_backward, ffn_forward, init_dense_net
from misinfo.preprocess import tokenize
from misinfo.relevance import (
    RelevanceConfig,
    evaluate_classifier,
    fit_tfidf,
    predict_relevance,
    train_relevance,
)
from misinfo.tagger import (
    VARIANTS,
    CrfLayer,
    TaggerConfig,
    crf_log_partition,
    evaluate_tagging,
    example_loss_and_grads,
    extract_anchors,
    init_tagger,
    train_tagger,
    viterbi_decode,
)


def criterion(label):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"[FAIL] {label}")
                raise
            print(f"[PASS] {label}")
            return result
        return wrapper
    return decorate


@criterion("01 crf-oracle-equivalence")
def test_crf_matches_brute_force_enumeration():
    started = time.monotonic()
    rng = np.random.default_rng(20240901)
    for _ in range(100):
        T = int(rng.integers(1, 7))
        emissions = rng.normal(size=(T, 3)) * 2.0
        crf = CrfLayer(rng.normal(size=(3, 3)), rng.normal(size=3),
                       rng.normal(size=3))
        assert crf_log_partition(emissions, crf) == pytest.approx(
            brute_force_log_partition(emissions, crf), abs=1e-8)
        assert viterbi_decode(emissions, crf) == brute_force_viterbi(emissions, crf)
    assert time.monotonic() - started < 5.0


@criterion("02 gradient-audit")
def test_gradient_audit_all_model_families():
    started = time.monotonic()
    rng = np.random.default_rng(7)
    table = EmbeddingTable(dim=5, vocab=["meat", "causes", "cancer", "sun", "cure"],
                           vectors=rng.normal(size=(5, 5)) * 0.6)
    token_pool = table.vocab
    # model families at reduced widths so exhaustive central differences fit
    # the runtime budget; layer wiring is identical to the full-size models
    for variant in VARIANTS:
        for trial in range(5):
            r = np.random.default_rng(100 * hash(variant) % 1009 + trial)
            tokens = list(r.choice(token_pool, size=3))
            tags = ["B", "I", "O"]
            item = with_bio_tags(make_annotated(
                f"{variant}{trial}", " ".join(tokens),
                spans=[(0, len(tokens[0]) + 1 + len(tokens[1]))]))
            assert item.bio_tags == tags
            model = init_tagger(variant, table,
                                TaggerConfig(lstm_hidden=3, attention_hidden=(4, 3),
                                             seed=trial))
            params = model.parameters()
            _, grads = example_loss_and_grads(model, item)
            err = finite_difference_max_rel_error(
                lambda: example_loss_and_grads(model, item)[0], params, grads)
            assert err < 1e-4, f"{variant} trial {trial}: {err}"

    for trial in range(5):
        r = np.random.default_rng(trial)
        net = init_dense_net([5, 8, 5, 3, 1], r)
        tokens = r.choice(table.vectors.shape[0], size=3)
        x = table.vectors[tokens].mean(axis=0)
        y = float(trial % 2)

        def loss():
            return float(bce_loss(ffn_forward(net, x)[0], y))

        p, cache = ffn_forward(net, x, return_cache=True)
        _, grads = ffn_backward(net, cache, p - y, skip_output_activation=True)
        err = finite_difference_max_rel_error(loss, net.params, grads)
        assert err < 1e-4, f"ffn trial {trial}: {err}"
    assert time.monotonic() - started < 60.0


def planted_anchor_corpus(n, seed):
    rng = np.random.default_rng(seed)
    anchors = [f"thing{i}" for i in range(12)]
    items = []
    for i in range(n):
        x, y = rng.choice(anchors, size=2, replace=False)
        text = f"{x} {y} causes cancer"
        items.append(with_bio_tags(make_annotated(
            f"p{seed}_{i}", text, spans=[(0, len(x) + 1 + len(y))])))
    vocab = anchors + ["causes", "cancer"]
    table = EmbeddingTable(dim=12, vocab=vocab,
                           vectors=rng.normal(size=(len(vocab), 12)) * 0.5)
    return items, table


def gaussian_relevance_corpus(n_per_class, seed):
    rng = np.random.default_rng(seed)
    pos_words = [f"p{i}" for i in range(30)]
    neg_words = [f"n{i}" for i in range(30)]
    center = np.zeros(8)
    center[0] = 2.0
    vectors = np.vstack([rng.normal(size=(30, 8)) * 0.3 + center,
                         rng.normal(size=(30, 8)) * 0.3 - center])
    table = EmbeddingTable(dim=8, vocab=pos_words + neg_words, vectors=vectors)
    items = []
    for i in range(n_per_class):
        items.append(make_annotated(
            f"pos{i}", " ".join(rng.choice(pos_words, size=4)), relevant=True))
        items.append(make_annotated(
            f"neg{i}", " ".join(rng.choice(neg_words, size=4)), relevant=False))
    return items, table


@criterion("03 overfit-integration")
def test_overfit_integration():
    started = time.monotonic()

    train_items, table = planted_anchor_corpus(50, seed=1)
    val_items, _ = planted_anchor_corpus(10, seed=2)
    split = Split(train=train_items, val=val_items, seed=0)
    cfg = TaggerConfig(lstm_hidden=16, epochs=50, learning_rate=5e-3,
                       patience=50, seed=0)
    tagger = train_tagger(split, "attn_bilstm_crf", table, cfg)
    span_f1 = evaluate_tagging(tagger, val_items).span.f1
    assert span_f1 >= 0.95, f"span F1 {span_f1}"

    items, emb = gaussian_relevance_corpus(100, seed=5)
    rel_split = Split(train=items[:160], val=items[160:], seed=0)
    rel_cfg = RelevanceConfig(hidden_dims=(32, 16), epochs=30, seed=2)
    model = train_relevance(rel_split, "weighted", rel_cfg, emb)
    preds = [predict_relevance(model, [t.text for t in it.tweet.tokens], emb)[1]
             for it in rel_split.train]
    acc = evaluate_classifier(preds, [it.relevant for it in rel_split.train]).accuracy
    assert acc >= 0.95, f"accuracy {acc}"

    assert time.monotonic() - started < 180.0


@criterion("04 tfidf-oracle")
def test_tfidf_hand_computed_fixture():
    model = fit_tfidf([["cancer", "cure"], ["cancer", "cause"], ["meat", "meat"]])
    assert model.idf[model.vocabulary["cancer"]] == pytest.approx(1.2877, abs=1e-4)
    for word in ("cure", "cause", "meat"):
        assert model.idf[model.vocabulary[word]] == pytest.approx(1.6931, abs=1e-4)


@criterion("05 statistics-oracles")
def test_statistics_oracles():
    t, df, p = welch_ttest([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    assert t == pytest.approx(-3.674, abs=0.001)
    assert df == pytest.approx(4.0, abs=0.01)
    assert p == pytest.approx(0.0213, abs=0.0005)
    assert p == pytest.approx(two_tailed_p_by_quadrature(t, df), abs=1e-6)

    # hand arithmetic of the +0.5-corrected odds ratio formula
    assert signed_log_odds((30, 100), (10, 100)) == pytest.approx(
        math.log((30.5 / 70.5) / (10.5 / 90.5)), abs=1e-3)
    assert signed_log_odds((5, 10), (0, 10)) == pytest.approx(
        math.log(21.0), abs=1e-3)

    t2, df2, p2 = welch_ttest([4.0, 5.0, 6.0], [1.0, 2.0, 3.0])
    assert t2 == -t and df2 == df and p2 == p
    for a, ta, b, tb in ((3, 9, 5, 11), (0, 4, 2, 7), (6, 6, 1, 8)):
        assert signed_log_odds((a, ta), (b, tb)) == -signed_log_odds((b, tb), (a, ta))


@criterion("06 bio-fidelity")
def test_bio_roundtrip_of_worked_sentence():
    tokens = tokenize("Processed meats causes cancer according to #WHO")
    tags = spans_to_bio(tokens, [(0, 15)])
    assert tags == ["B", "I", "O", "O", "O", "O", "O"]
    anchors = extract_anchors([t.text for t in tokens], tags)
    assert anchors == ["Processed meats"]


@criterion("07 cure-detector")
def test_cure_detector_fixture_behavior():
    table = orthonormal_cure_table()
    lexicon = build_lexicon(table)
    for tau in (0.05, 0.3, 0.6, 0.9, 0.99):
        cfg = CureConfig(tau)
        assert detect_cure_anchor(["chemotherapy"], table, lexicon, cfg)
        assert detect_cure_anchor(["radiation", "therapy"], table, lexicon, cfg)
        assert detect_cure_anchor(["targeted", "therapy", "helps"],
                                  table, lexicon, cfg)
        assert not detect_cure_anchor(["carrot", "juice"], table, lexicon, cfg)
        assert not detect_cure_anchor(["dog", "urine"], table, lexicon, cfg)
    tokens = ["radiotherapy", "chemotherapy", "carrot", "therapy"]
    previous = None
    for tau in (0.2, 0.4, 0.6, 0.8, 0.95):
        hits = {(h.start, h.end)
                for h in detect_cure_anchor(tokens, table, lexicon, CureConfig(tau))}
        if previous is not None:
            assert hits <= previous
        previous = hits


def _write_training_corpus(path):
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
        records.append({"id": f"t{i}", "text": text, "category": "cause",
                        "relevant": rel, "anchors": anchors})
    path.write_text("".join(json.dumps(r) + "\n" for r in records))


def _write_embeddings(path):
    rng = np.random.default_rng(1)
    vocab = ([f"thing{i}" for i in range(8)]
             + ["causes", "cancer", "nothing", "here", "at", "all"]
             + [f"number{i}" for i in range(25)])
    table = EmbeddingTable(dim=8, vocab=vocab,
                           vectors=rng.normal(size=(len(vocab), 8)) * 0.5)
    save_embeddings(table, path)


@criterion("08 determinism")
def test_rerun_is_byte_identical(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    emb = tmp_path / "emb.txt"
    _write_training_corpus(corpus)
    _write_embeddings(emb)

    digests = []
    for attempt in ("a", "b"):
        model = tmp_path / f"model_{attempt}.json"
        report = tmp_path / f"report_{attempt}.json"
        assert run(["train-tagger", "--in", str(corpus), "--out", str(model),
                    "--variant", "attn-bilstm-crf", "--embeddings", str(emb),
                    "--epochs", "2", "--lstm-hidden", "4", "--seed", "11"]) == 0
        assert run(["eval-tagger", "--in", str(corpus), "--model", str(model),
                    "--embeddings", str(emb), "--out", str(report),
                    "--seed", "11"]) == 0
        digests.append(tuple(
            hashlib.sha256((tmp_path / f"{name}_{attempt}{ext}").read_bytes()).hexdigest()
            for name, ext in (("model", ".json"), ("report", ".json"),
                              ("report", ".tsv"), ("report", ".png"))))
    assert digests[0] == digests[1]

    rel_digests = []
    for attempt in ("a", "b"):
        model = tmp_path / f"rel_{attempt}.json"
        assert run(["train-relevance", "--in", str(corpus), "--out", str(model),
                    "--mode", "tfidf", "--epochs", "2", "--seed", "11"]) == 0
        rel_digests.append(hashlib.sha256(model.read_bytes()).hexdigest())
    assert rel_digests[0] == rel_digests[1]


@criterion("09 report-conformance")
def test_report_schemas(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    emb = tmp_path / "emb.txt"
    _write_training_corpus(corpus)
    _write_embeddings(emb)

    rel_model = tmp_path / "rel.json"
    assert run(["train-relevance", "--in", str(corpus), "--out", str(rel_model),
                "--mode", "weighted", "--embeddings", str(emb),
                "--epochs", "2", "--seed", "1"]) == 0
    rel_report = tmp_path / "rel_report.json"
    assert run(["eval-relevance", "--in", str(corpus), "--model", str(rel_model),
                "--embeddings", str(emb), "--out", str(rel_report)]) == 0
    payload = json.loads(rel_report.read_text())
    assert isinstance(payload["seed"], int)
    assert isinstance(payload["config_digest"], str)
    assert payload["rows"], "relevance report has no rows"
    for row in payload["rows"]:
        assert set(row) == {"domain", "mode", "f1", "accuracy", "precision", "recall"}
        assert row["domain"] in ("cause", "cure", "prevent")
        assert row["mode"] in ("tfidf", "weighted")
        for key in ("f1", "accuracy", "precision", "recall"):
            assert 0.0 <= row[key] <= 1.0

    tag_model = tmp_path / "tag.json"
    assert run(["train-tagger", "--in", str(corpus), "--out", str(tag_model),
                "--variant", "crf", "--embeddings", str(emb),
                "--epochs", "2", "--seed", "1"]) == 0
    tag_report = tmp_path / "tag_report.json"
    assert run(["eval-tagger", "--in", str(corpus), "--model", str(tag_model),
                "--embeddings", str(emb), "--out", str(tag_report)]) == 0
    payload = json.loads(tag_report.read_text())
    assert payload["rows"], "tagger report has no rows"
    for row in payload["rows"]:
        assert set(row) == {"variant", "span_f1", "span_precision", "span_recall",
                            "token_f1", "token_precision", "token_recall",
                            "token_accuracy"}
        assert row["variant"] in VARIANTS
        for key in row:
            if key != "variant":
                assert 0.0 <= row[key] <= 1.0


@criterion("10 skipgram-sanity")
def test_skipgram_sanity():
    corpus = ([["flame", "heat", "burn"]] * 200
              + [["flame", "fire", "burn"]] * 200
              + [["snow", "ice", "frost"]] * 200)
    losses = []
    table = train_skipgram(corpus, SkipgramConfig(dim=16, epochs=3, seed=42),
                           on_epoch=lambda e, loss: losses.append(loss))
    assert len(losses) == 3
    assert losses[1] <= losses[0] and losses[2] <= losses[1]
    heat, fire, ice = (lookup(table, w) for w in ("heat", "fire", "ice"))
    assert cosine(heat, fire) > cosine(heat, ice)

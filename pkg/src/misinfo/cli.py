"""Command-line pipeline driver.

Exit codes: 0 success, 1 usage error, 2 data/IO error. A flat key=value
config file supplies defaults; explicit flags win. Every artifact records
the seed and a digest of the effective configuration, and reruns with the
same inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import corpus, model_io, report
from .analysis import (
    compare_groups,
    keyword_spread,
    load_lexicon,
    stem_anchor,
    top_keywords,
)
from .cure_detect import (
    CureConfig,
    CureVerdict,
    build_lexicon,
    classify_cure_misinfo,
    detect_cure_anchor,
    load_cure_terms,
)
from .embeddings import SkipgramConfig, load_embeddings, save_embeddings, train_skipgram
from .errors import MisinfoError
from .preprocess import CleanConfig, clean, tokenize
from .relevance import (
    RelevanceConfig,
    evaluate_classifier,
    predict_relevance,
    train_relevance,
)
from .tagger import TaggerConfig, evaluate_tagging, extract_anchors, tag, train_tagger

CLI_VARIANTS = {
    "crf": "crf_only",
    "bilstm-softmax": "bilstm_softmax",
    "bilstm-crf": "bilstm_crf",
    "attn-bilstm-crf": "attn_bilstm_crf",
    "self-attn-bilstm-crf": "self_attn_bilstm_crf",
}

CLI_MODES = {"tfidf": "tfidf", "weighted": "weighted"}

_CONFIG_KEYS = (
    "seed", "mode", "variant", "tau", "k", "epochs", "batch_size",
    "learning_rate", "patience", "lstm_hidden", "embeddings", "lexicons",
    "cure_terms", "min_count", "dim", "window", "negatives",
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


def _load_config(path) -> dict:
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise MisinfoError(f"{path}:{line_no}: expected key=value")
            cfg[key.strip()] = value.strip()
    return cfg


class Settings:
    """Defaults overlaid with config-file values overlaid with CLI flags."""

    def __init__(self, args):
        self.values: dict = {}
        if getattr(args, "config", None):
            self.values.update(_load_config(args.config))
        for key in _CONFIG_KEYS:
            flag = getattr(args, key, None)
            if flag is not None:
                self.values[key] = flag

    def get(self, key, default=None, cast=None):
        if key not in self.values:
            return default
        value = self.values[key]
        return cast(value) if cast and isinstance(value, str) else value

    def digest(self) -> str:
        blob = "\n".join(f"{k}={self.values[k]}" for k in sorted(self.values))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _ensure_tokens(items, clean_cfg: CleanConfig):
    for item in items:
        tweet = item.tweet
        if tweet.clean_text is None:
            tweet.clean_text = clean(tweet.raw_text, clean_cfg)
        if tweet.tokens is None:
            tweet.tokens = tokenize(tweet.clean_text, clean_cfg.keep_hashtag_mark)
    return items


def _write_meta_sidecar(out_path, seed: int, digest: str) -> None:
    meta_path = str(out_path) + ".meta.json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump({"seed": seed, "config_digest": digest}, fh, sort_keys=True)
        fh.write("\n")


def _report_paths(out):
    out = str(out)
    stem = out[: out.rfind(".")] if "." in Path(out).name else out
    return out, stem + ".tsv", stem + ".png"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_preprocess(args) -> int:
    settings = Settings(args)
    items = corpus.load_annotated(args.infile)
    _ensure_tokens(items, CleanConfig())
    corpus.write_jsonl(args.out, items)
    _write_meta_sidecar(args.out, settings.get("seed", 0, int), settings.digest())
    print(f"wrote {len(items)} records to {args.out}")
    return 0


def _cmd_split(args) -> int:
    settings = Settings(args)
    seed = settings.get("seed", 0, int)
    items = corpus.load_annotated(args.infile)
    split = corpus.split_dataset(items, seed)
    manifest = {
        "seed": split.seed,
        "train_ids": [t.tweet.id for t in split.train],
        "val_ids": [t.tweet.id for t in split.val],
        "config_digest": settings.digest(),
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"split {len(items)} tweets into {len(split.train)} train / "
          f"{len(split.val)} val (seed {seed})")
    return 0


def _train_settings(settings) -> dict:
    out = {}
    for key, cast in (("epochs", int), ("batch_size", int),
                      ("learning_rate", float), ("patience", int)):
        value = settings.get(key, None, cast)
        if value is not None:
            out[key] = value
    return out


def _cmd_train_relevance(args) -> int:
    settings = Settings(args)
    seed = settings.get("seed", 0, int)
    mode = CLI_MODES[settings.get("mode", "tfidf")]
    items = _ensure_tokens(corpus.load_annotated(args.infile), CleanConfig())
    split = corpus.split_dataset(items, seed)
    embeddings = None
    if mode == "weighted":
        emb_path = settings.get("embeddings")
        if not emb_path:
            raise MisinfoError("weighted mode needs --embeddings")
        embeddings = load_embeddings(emb_path)
    cfg = RelevanceConfig(seed=seed, **_train_settings(settings))
    model = train_relevance(
        split, mode, cfg, embeddings,
        on_epoch=lambda e, loss, f1: print(
            f"epoch {e}: train_loss {loss:.4f} val_f1 {f1:.4f}"))
    model_io.save_relevance_model(model, args.out, seed, settings.digest())
    print(f"saved relevance model to {args.out}")
    return 0


def _load_corpus_with_embeddings(args, settings):
    items = _ensure_tokens(corpus.load_annotated(args.infile), CleanConfig())
    emb_path = settings.get("embeddings")
    embeddings = load_embeddings(emb_path) if emb_path else None
    return items, embeddings


def _cmd_eval_relevance(args) -> int:
    settings = Settings(args)
    items, embeddings = _load_corpus_with_embeddings(args, settings)
    rows = []
    for model_path in args.model:
        model = model_io.load_relevance_model(model_path)
        by_domain: dict[str, list] = {}
        for item in items:
            by_domain.setdefault(item.tweet.category, []).append(item)
        for domain in sorted(by_domain):
            group = by_domain[domain]
            preds = [predict_relevance(model, [t.text for t in it.tweet.tokens or []],
                                       embeddings)[1] for it in group]
            metrics = evaluate_classifier(preds, [bool(it.relevant) for it in group])
            rows.append(report.relevance_row(domain, model.mode, metrics))
    json_path, tsv_path, fig_path = _report_paths(args.out)
    report.write_relevance_report(rows, json_path, tsv_path, fig_path,
                                  settings.get("seed", 0, int), settings.digest())
    print(f"{'domain':<10} {'mode':<10} {'F1':>8} {'accuracy':>9}")
    for r in rows:
        print(f"{r['domain']:<10} {r['mode']:<10} {r['f1']:>8.4f} {r['accuracy']:>9.4f}")
    return 0


def _cmd_train_tagger(args) -> int:
    settings = Settings(args)
    seed = settings.get("seed", 0, int)
    variant = CLI_VARIANTS[settings.get("variant", "attn-bilstm-crf")]
    emb_path = settings.get("embeddings")
    if not emb_path:
        raise MisinfoError("train-tagger needs --embeddings")
    embeddings = load_embeddings(emb_path)
    items = _ensure_tokens(corpus.load_annotated(args.infile), CleanConfig())
    items = [corpus.with_bio_tags(it) for it in items if it.relevant]
    split = corpus.split_dataset(items, seed)
    cfg = TaggerConfig(seed=seed, **_train_settings(settings))
    lstm_hidden = settings.get("lstm_hidden", None, int)
    if lstm_hidden is not None:
        cfg.lstm_hidden = lstm_hidden
    if args.features:
        cfg.feature_names = tuple(args.features.split(","))
    model = train_tagger(
        split, variant, embeddings, cfg,
        on_epoch=lambda e, loss, f1: print(
            f"epoch {e}: train_loss {loss:.4f} val_span_f1 {f1:.4f}"))
    model_io.save_tagger_model(model, args.out, seed, settings.digest())
    print(f"saved {variant} tagger to {args.out}")
    return 0


def _cmd_eval_tagger(args) -> int:
    settings = Settings(args)
    emb_path = settings.get("embeddings")
    if not emb_path:
        raise MisinfoError("eval-tagger needs --embeddings")
    embeddings = load_embeddings(emb_path)
    items = _ensure_tokens(corpus.load_annotated(args.infile), CleanConfig())
    items = [corpus.with_bio_tags(it) for it in items if it.relevant]
    rows = []
    for model_path in args.model:
        model = model_io.load_tagger_model(model_path, embeddings)
        result = evaluate_tagging(model, items)
        rows.append(report.tagger_row(model.variant, result.span, result.token))
    json_path, tsv_path, fig_path = _report_paths(args.out)
    report.write_tagger_report(rows, json_path, tsv_path, fig_path,
                               settings.get("seed", 0, int), settings.digest())
    print(f"{'variant':<22} {'span F1':>8} {'token F1':>9}")
    for r in rows:
        print(f"{r['variant']:<22} {r['span_f1']:>8.4f} {r['token_f1']:>9.4f}")
    return 0


def _cmd_tag(args) -> int:
    settings = Settings(args)
    emb_path = settings.get("embeddings")
    if not emb_path:
        raise MisinfoError("tag needs --embeddings")
    embeddings = load_embeddings(emb_path)
    items = _ensure_tokens(corpus.load_annotated(args.infile), CleanConfig())
    model = model_io.load_tagger_model(args.model, embeddings)
    with open(args.out, "w", encoding="utf-8") as fh:
        for item in items:
            tokens = [t.text for t in item.tweet.tokens or []]
            if tokens:
                tags = tag(model, tokens, item.features)
                anchors = extract_anchors(tokens, tags)
            else:
                tags, anchors = [], []
            fh.write(json.dumps({"id": item.tweet.id, "tags": tags,
                                 "anchors": anchors}, sort_keys=True))
            fh.write("\n")
    _write_meta_sidecar(args.out, settings.get("seed", 0, int), settings.digest())
    print(f"tagged {len(items)} tweets into {args.out}")
    return 0


def _cmd_detect_cure(args) -> int:
    settings = Settings(args)
    emb_path = settings.get("embeddings")
    if not emb_path:
        raise MisinfoError("detect-cure needs --embeddings")
    embeddings = load_embeddings(emb_path)
    terms_path = settings.get("cure_terms")
    terms = load_cure_terms(terms_path) if terms_path else None
    lexicon = build_lexicon(embeddings, terms) if terms else build_lexicon(embeddings)
    cfg = CureConfig(threshold=settings.get("tau", 0.60, float))
    items = _ensure_tokens(corpus.load_annotated(args.infile), CleanConfig())
    n_flagged = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for item in items:
            tokens = [t.text for t in item.tweet.tokens or []]
            hits = detect_cure_anchor(tokens, embeddings, lexicon, cfg)
            verdict = classify_cure_misinfo(tokens, embeddings, lexicon, cfg)
            n_flagged += verdict is CureVerdict.MISINFO_CANDIDATE
            fh.write(json.dumps({
                "id": item.tweet.id,
                "verdict": verdict.value,
                "hits": [{"start": h.start, "end": h.end,
                          "score": round(h.score, 6)} for h in hits],
            }, sort_keys=True))
            fh.write("\n")
    _write_meta_sidecar(args.out, settings.get("seed", 0, int), settings.digest())
    print(f"{n_flagged}/{len(items)} tweets flagged as cure-misinformation "
          f"candidates (tau {cfg.threshold})")
    return 0


def _anchor_strings(path) -> list[list[str]]:
    """Anchor strings per record, from tag output or an annotated corpus."""
    per_tweet: list[list[str]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            anchors = obj.get("anchors") or []
            if anchors and isinstance(anchors[0], str):
                per_tweet.append([str(a) for a in anchors])
            elif anchors:
                clean_text = obj.get("clean")
                if clean_text is None:
                    clean_text = clean(obj.get("text", ""), CleanConfig())
                data = clean_text.encode("utf-8")
                per_tweet.append([
                    data[int(s):int(e)].decode("utf-8", "replace")
                    for s, e in anchors])
            else:
                per_tweet.append([])
    return per_tweet


def _cmd_keywords(args) -> int:
    settings = Settings(args)
    k = settings.get("k", 20, int)
    anchor_lists = _anchor_strings(args.infile)
    flat = [a for anchors in anchor_lists for a in anchors]
    top = top_keywords(flat, k)
    top_stems = {w for w, _ in top}
    misinfo_stems: set[str] = set()
    if args.misinfo_keywords:
        misinfo_stems = {stem_anchor(t) for t in load_cure_terms(args.misinfo_keywords)}
    spread = keyword_spread(anchor_lists, misinfo_stems, top_stems)
    json_path, tsv_path, fig_path = _report_paths(args.out)
    report.write_keyword_report(top, spread, json_path, tsv_path, fig_path,
                                settings.get("seed", 0, int), settings.digest())
    for word, count in top:
        print(f"{count:>6}  {word}")
    print(f"misinformation spread: {spread:.2%}")
    return 0


def _cmd_compare(args) -> int:
    settings = Settings(args)
    lexicon_paths = (settings.get("lexicons") or "").split(",")
    lexicon_paths = [p for p in lexicon_paths if p]
    if not lexicon_paths:
        raise MisinfoError("compare needs --lexicons")
    lexicons = [load_lexicon(p, Path(p).stem) for p in lexicon_paths]
    items = _ensure_tokens(corpus.load_annotated(args.infile), CleanConfig())
    misinfo_tokens = [[t.text.lower() for t in it.tweet.tokens or []]
                      for it in items if it.misinfo is True]
    correct_tokens = [[t.text.lower() for t in it.tweet.tokens or []]
                      for it in items if it.misinfo is False]
    rows = compare_groups(misinfo_tokens, correct_tokens, lexicons)
    tsv_path = str(args.out)
    stem_path = tsv_path[: tsv_path.rfind(".")] if "." in Path(tsv_path).name else tsv_path
    report.write_comparison_report(rows, tsv_path, stem_path + ".json",
                                   stem_path + ".png",
                                   settings.get("seed", 0, int), settings.digest())
    n_sig = sum(r.significant for r in rows)
    print(f"{n_sig}/{len(rows)} features significant at p < 0.05")
    for r in rows[:10]:
        print(f"{r.feature:<28} log_odds {r.signed_log_odds:+.3f} p {r.p_value:.4f}")
    return 0


def _cmd_train_embeddings(args) -> int:
    settings = Settings(args)
    items = _ensure_tokens(corpus.load_annotated(args.infile), CleanConfig())
    sentences = [[t.text.lower() for t in it.tweet.tokens or []] for it in items]
    cfg = SkipgramConfig(
        dim=settings.get("dim", 100, int),
        window=settings.get("window", 5, int),
        negatives=settings.get("negatives", 5, int),
        epochs=settings.get("epochs", 5, int),
        min_count=settings.get("min_count", 2, int),
        seed=settings.get("seed", 0, int),
    )
    table = train_skipgram(
        sentences, cfg,
        on_epoch=lambda e, loss: print(f"epoch {e}: loss {loss:.4f}"))
    save_embeddings(table, args.out)
    print(f"saved {len(table.vocab)} x {table.dim} embeddings to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="misinfo",
                     description="Cancer-misinformation tweet pipeline")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_, **kwargs):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None)
        return p

    p = add("preprocess", _cmd_preprocess, "clean and tokenize a tweet file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)

    p = add("split", _cmd_split, "write a seeded 4:1 split manifest")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)

    p = add("train-relevance", _cmd_train_relevance, "train the relevance classifier")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=sorted(CLI_MODES), default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--patience", type=int, default=None)

    p = add("eval-relevance", _cmd_eval_relevance, "score a relevance model")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--model", action="append", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", default=None)

    p = add("train-tagger", _cmd_train_tagger, "train an anchor tagger")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=sorted(CLI_VARIANTS), default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--features", default=None,
                   help="comma-separated per-token feature keys (pos,deptag)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--lstm-hidden", dest="lstm_hidden", type=int, default=None)

    p = add("eval-tagger", _cmd_eval_tagger, "score tagger models")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--model", action="append", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", default=None)

    p = add("tag", _cmd_tag, "tag tweets and extract anchors")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", default=None)

    p = add("detect-cure", _cmd_detect_cure, "flag cure-misinformation candidates")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--cure-terms", dest="cure_terms", default=None)

    p = add("keywords", _cmd_keywords, "top anchors and misinformation spread")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--misinfo-keywords", dest="misinfo_keywords", default=None)

    p = add("compare", _cmd_compare, "linguistic statistics between groups")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lexicons", default=None)

    p = add("train-embeddings", _cmd_train_embeddings,
            "train skip-gram vectors from a corpus")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--negatives", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--min-count", dest="min_count", type=int, default=None)

    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    try:
        return args.func(args)
    except MisinfoError as exc:
        print(f"misinfo: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"misinfo: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())

"""Model persistence.

File layout: {"format_version": 1, "arch": ..., "params": {name: {"shape":
[...], "data": [row-major floats]}}, "meta": {...}, "seed": ...,
"config_digest": ...}. Loading a saved model reproduces its predictions
exactly (floats are serialized with full round-trip precision).
"""

from __future__ import annotations

import json

import numpy as np

from .embeddings import EmbeddingTable
from .errors import CorruptFile, DimensionMismatch, UnsupportedVersion
from .neural import AttentionNet, DenseNet, LstmParams, Params
from .relevance import RelevanceModel, TfidfModel
from .tagger import CrfLayer, K, TaggerModel

FORMAT_VERSION = 1


def _params_to_json(params: Params) -> dict:
    return {
        name: {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel()]}
        for name, arr in sorted(params.items())
    }


def _params_from_json(obj: dict) -> Params:
    params: Params = {}
    for name, entry in obj.items():
        try:
            arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptFile(f"bad parameter entry {name!r}: {exc}") from None
        params[name] = arr
    return params


def save_params_file(path, arch: str, params: Params, meta: dict,
                     seed: int = 0, config_digest: str = "") -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "arch": arch,
        "params": _params_to_json(params),
        "meta": meta,
        "seed": seed,
        "config_digest": config_digest,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_params_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"cannot parse model file {path}: {exc}") from None
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CorruptFile(f"model file {path} lacks a format_version")
    if payload["format_version"] != FORMAT_VERSION:
        raise UnsupportedVersion(payload["format_version"])
    for key in ("arch", "params", "meta"):
        if key not in payload:
            raise CorruptFile(f"model file {path} lacks {key!r}")
    payload["params"] = _params_from_json(payload["params"])
    return payload


# ---------------------------------------------------------------------------
# Relevance models
# ---------------------------------------------------------------------------


def save_relevance_model(model: RelevanceModel, path, seed: int = 0,
                         config_digest: str = "") -> None:
    params = dict(model.net.params)
    params["tfidf.idf"] = model.tfidf.idf
    vocab = [None] * len(model.tfidf.vocabulary)
    for word, idx in model.tfidf.vocabulary.items():
        vocab[idx] = word
    meta = {
        "mode": model.mode,
        "layer_dims": model.net.layer_dims,
        "decision_threshold": model.decision_threshold,
        "vocabulary": vocab,
        "doc_count": model.tfidf.doc_count,
    }
    save_params_file(path, "relevance", params, meta, seed, config_digest)


def load_relevance_model(path) -> RelevanceModel:
    payload = load_params_file(path)
    if payload["arch"] != "relevance":
        raise CorruptFile(f"expected a relevance model, got {payload['arch']!r}")
    meta = payload["meta"]
    params = payload["params"]
    try:
        idf = params.pop("tfidf.idf")
        tfidf = TfidfModel(
            vocabulary={w: i for i, w in enumerate(meta["vocabulary"])},
            idf=idf,
            doc_count=int(meta["doc_count"]),
        )
        net = DenseNet(list(meta["layer_dims"]), params)
        return RelevanceModel(mode=meta["mode"], tfidf=tfidf, net=net,
                              decision_threshold=float(meta["decision_threshold"]))
    except KeyError as exc:
        raise CorruptFile(f"relevance model missing field: {exc}") from None


# ---------------------------------------------------------------------------
# Tagger models
# ---------------------------------------------------------------------------


def _subset(params: Params, prefix: str) -> Params:
    plen = len(prefix) + 1
    return {k[plen:]: v for k, v in params.items() if k.startswith(prefix + ".")}


def save_tagger_model(model: TaggerModel, path, seed: int = 0,
                      config_digest: str = "") -> None:
    meta = {
        "variant": model.variant,
        "embedding_dim": model.embeddings.dim,
        "feature_vocabs": model.feature_vocabs,
    }
    if model.attention is not None:
        meta["attention_dims"] = model.attention.net.layer_dims
    save_params_file(path, "tagger", model.parameters(), meta, seed, config_digest)


def load_tagger_model(path, embeddings: EmbeddingTable) -> TaggerModel:
    payload = load_params_file(path)
    if payload["arch"] != "tagger":
        raise CorruptFile(f"expected a tagger model, got {payload['arch']!r}")
    meta = payload["meta"]
    params = payload["params"]
    try:
        if meta["embedding_dim"] != embeddings.dim:
            raise DimensionMismatch(
                f"model expects {meta['embedding_dim']}-dim embeddings, "
                f"table has {embeddings.dim}")
        attention = None
        att_params = _subset(params, "att")
        if att_params:
            attention = AttentionNet(DenseNet(
                list(meta["attention_dims"]), att_params,
                hidden_activation="tanh", output_activation="linear"))
        self_attention = _subset(params, "selfatt") or None
        lstm_fwd = lstm_bwd = None
        f_params = _subset(params, "lstm_f")
        if f_params:
            hidden, input_dim = f_params["W_i"].shape
            lstm_fwd = LstmParams(input_dim, hidden, f_params)
            lstm_bwd = LstmParams(input_dim, hidden, _subset(params, "lstm_b"))
        crf = None
        crf_params = _subset(params, "crf")
        if crf_params:
            crf = CrfLayer(transitions=crf_params["trans"],
                           start_scores=crf_params["start"],
                           end_scores=crf_params["end"])
        proj = _subset(params, "proj")
        if proj["W"].shape[0] != K:
            raise CorruptFile("projection must map to 3 tag scores")
        return TaggerModel(
            variant=meta["variant"], embeddings=embeddings, projection=proj,
            attention=attention, self_attention=self_attention,
            lstm_fwd=lstm_fwd, lstm_bwd=lstm_bwd, crf=crf,
            feature_vocabs={k: list(v) for k, v in meta["feature_vocabs"].items()},
        )
    except KeyError as exc:
        raise CorruptFile(f"tagger model missing field: {exc}") from None

"""BIO anchor tagging: CRF layer, encoder variants, decoding and evaluation.

Tag indices are fixed as B=0, I=1, O=2. The CRF is trained unconstrained;
well-formedness (no O->I, no leading I) is enforced only at decode time by
masking, so the trained distribution is untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import neural
from .corpus import AnnotatedTweet, Split, bio_to_token_spans
from .embeddings import EmbeddingTable, lookup
from .errors import (
    CorpusMismatch,
    EmptySequence,
    LengthMismatch,
    MalformedTags,
    MissingTags,
)
from .neural import (
    AttentionNet,
    LstmParams,
    OptimizerState,
    Params,
    attention_apply,
    attention_backward,
    bilstm_backward,
    bilstm_encode,
    clone_params,
    init_attention,
    init_lstm,
    init_self_attention,
    merge_params,
    optimizer_step,
    prefixed,
    self_attention_apply,
    self_attention_backward,
    softmax,
)
from .relevance import Metrics, _metrics_from_counts

TAGS = ("B", "I", "O")
TAG_INDEX = {t: i for i, t in enumerate(TAGS)}
K = 3

VARIANTS = (
    "crf_only",
    "bilstm_softmax",
    "bilstm_crf",
    "attn_bilstm_crf",
    "self_attn_bilstm_crf",
)

NEG_INF = -1e30  # decode-time mask; keeps arithmetic NaN-free


@dataclass
class CrfLayer:
    transitions: np.ndarray  # (K, K): [i, j] scores tag j following tag i
    start_scores: np.ndarray  # (K,)
    end_scores: np.ndarray  # (K,)

    def params(self) -> Params:
        return {"trans": self.transitions, "start": self.start_scores,
                "end": self.end_scores}


def init_crf(rng) -> CrfLayer:
    return CrfLayer(
        transitions=rng.uniform(-0.1, 0.1, size=(K, K)),
        start_scores=rng.uniform(-0.1, 0.1, size=K),
        end_scores=rng.uniform(-0.1, 0.1, size=K),
    )


def _logsumexp(a, axis=None):
    if axis is None:
        m = float(np.max(a))
        return m + float(np.log(np.sum(np.exp(a - m))))
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def crf_log_partition(emissions, crf: CrfLayer) -> float:
    """log sum over all K^T paths of exp(path score), by the forward recursion."""
    emissions = np.asarray(emissions, dtype=np.float64)
    if emissions.ndim != 2 or emissions.shape[0] == 0 or emissions.shape[1] != K:
        raise EmptySequence("emissions must be a non-empty (T, 3) matrix")
    alpha = crf.start_scores + emissions[0]
    for t in range(1, emissions.shape[0]):
        alpha = emissions[t] + _logsumexp(alpha[:, None] + crf.transitions, axis=0)
    return float(_logsumexp(alpha + crf.end_scores))


def crf_path_score(emissions, crf: CrfLayer, tag_ids) -> float:
    emissions = np.asarray(emissions, dtype=np.float64)
    score = crf.start_scores[tag_ids[0]] + emissions[0, tag_ids[0]]
    for t in range(1, len(tag_ids)):
        score += crf.transitions[tag_ids[t - 1], tag_ids[t]] + emissions[t, tag_ids[t]]
    return float(score + crf.end_scores[tag_ids[-1]])


def _tag_ids(tags) -> list[int]:
    try:
        return [TAG_INDEX[t] for t in tags]
    except KeyError as exc:
        raise MalformedTags(f"unknown tag {exc.args[0]!r}") from None


def crf_nll(emissions, crf: CrfLayer, tags) -> float:
    """Negative log-likelihood of the gold path."""
    emissions = np.asarray(emissions, dtype=np.float64)
    if len(tags) != emissions.shape[0]:
        raise LengthMismatch(
            f"{len(tags)} tags for {emissions.shape[0]} emission rows")
    ids = _tag_ids(tags)
    return crf_log_partition(emissions, crf) - crf_path_score(emissions, crf, ids)


def crf_marginals(emissions, crf: CrfLayer):
    """Forward-backward: (unary (T,K), pairwise (T-1,K,K), logZ)."""
    emissions = np.asarray(emissions, dtype=np.float64)
    T = emissions.shape[0]
    alpha = np.empty((T, K))
    alpha[0] = crf.start_scores + emissions[0]
    for t in range(1, T):
        alpha[t] = emissions[t] + _logsumexp(alpha[t - 1][:, None] + crf.transitions, axis=0)
    beta = np.empty((T, K))
    beta[T - 1] = crf.end_scores
    for t in range(T - 2, -1, -1):
        beta[t] = _logsumexp(crf.transitions + (emissions[t + 1] + beta[t + 1])[None, :], axis=1)
    log_z = float(_logsumexp(alpha[T - 1] + crf.end_scores))
    unary = np.exp(alpha + beta - log_z)
    pairwise = np.empty((max(T - 1, 0), K, K))
    for t in range(T - 1):
        pairwise[t] = np.exp(
            alpha[t][:, None] + crf.transitions
            + (emissions[t + 1] + beta[t + 1])[None, :] - log_z)
    return unary, pairwise, log_z


def crf_nll_grads(emissions, crf: CrfLayer, tags):
    """(nll, d_emissions, crf gradient dict) via marginals minus gold counts."""
    emissions = np.asarray(emissions, dtype=np.float64)
    ids = _tag_ids(tags)
    unary, pairwise, log_z = crf_marginals(emissions, crf)
    nll = log_z - crf_path_score(emissions, crf, ids)
    d_emissions = unary.copy()
    d_trans = pairwise.sum(axis=0) if len(ids) > 1 else np.zeros((K, K))
    d_start = unary[0].copy()
    d_end = unary[-1].copy()
    for t, k in enumerate(ids):
        d_emissions[t, k] -= 1.0
    for t in range(1, len(ids)):
        d_trans[ids[t - 1], ids[t]] -= 1.0
    d_start[ids[0]] -= 1.0
    d_end[ids[-1]] -= 1.0
    return nll, d_emissions, {"trans": d_trans, "start": d_start, "end": d_end}


def viterbi_decode(emissions, crf: CrfLayer) -> list[str]:
    """Best well-formed path; ties go to the lowest tag index (B < I < O).

    The suffix-score recursion plus front-to-back argmax reconstruction
    makes the tie rule equal to "lexicographically smallest optimal path",
    which brute-force enumeration can replicate exactly.
    """
    emissions = np.asarray(emissions, dtype=np.float64)
    if emissions.ndim != 2 or emissions.shape[0] == 0 or emissions.shape[1] != K:
        raise EmptySequence("emissions must be a non-empty (T, 3) matrix")
    T = emissions.shape[0]
    trans = crf.transitions.copy()
    trans[TAG_INDEX["O"], TAG_INDEX["I"]] = NEG_INF
    start = crf.start_scores.copy()
    start[TAG_INDEX["I"]] = NEG_INF

    suffix = np.empty((T, K))
    suffix[T - 1] = emissions[T - 1] + crf.end_scores
    for t in range(T - 2, -1, -1):
        suffix[t] = emissions[t] + np.max(trans + suffix[t + 1][None, :], axis=1)

    path = [int(np.argmax(start + suffix[0]))]
    for t in range(1, T):
        path.append(int(np.argmax(trans[path[-1]] + suffix[t])))
    return [TAGS[i] for i in path]


# ---------------------------------------------------------------------------
# Tagger models
# ---------------------------------------------------------------------------


@dataclass
class TaggerConfig:
    lstm_hidden: int = 32
    attention_hidden: tuple[int, int] = (64, 32)
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    patience: int = 5
    optimizer: str = "adam"
    seed: int = 0
    feature_names: tuple[str, ...] = ()  # e.g. ("pos",) or ("pos", "deptag")


@dataclass
class TaggerModel:
    variant: str
    embeddings: EmbeddingTable
    projection: Params  # W (K, enc_dim), b (K,)
    attention: AttentionNet | None = None
    self_attention: Params | None = None
    lstm_fwd: LstmParams | None = None
    lstm_bwd: LstmParams | None = None
    crf: CrfLayer | None = None
    feature_vocabs: dict[str, list[str]] = field(default_factory=dict)

    def input_dim(self) -> int:
        return self.embeddings.dim + sum(len(v) for v in self.feature_vocabs.values())

    def parameters(self) -> Params:
        groups = [prefixed("proj", self.projection)]
        if self.attention is not None:
            groups.append(prefixed("att", self.attention.net.params))
        if self.self_attention is not None:
            groups.append(prefixed("selfatt", self.self_attention))
        if self.lstm_fwd is not None:
            groups.append(prefixed("lstm_f", self.lstm_fwd.params))
        if self.lstm_bwd is not None:
            groups.append(prefixed("lstm_b", self.lstm_bwd.params))
        if self.crf is not None:
            groups.append(prefixed("crf", self.crf.params()))
        return merge_params(*groups)


def init_tagger(variant: str, embeddings: EmbeddingTable, cfg: TaggerConfig,
                feature_vocabs: dict[str, list[str]] | None = None) -> TaggerModel:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    rng = np.random.default_rng(cfg.seed)
    feature_vocabs = feature_vocabs or {}
    in_dim = embeddings.dim + sum(len(v) for v in feature_vocabs.values())

    attention = None
    self_attention = None
    lstm_fwd = lstm_bwd = None
    if variant == "attn_bilstm_crf":
        attention = init_attention(in_dim, rng, hidden=cfg.attention_hidden)
    if variant == "self_attn_bilstm_crf":
        self_attention = init_self_attention(in_dim, rng)
    if variant != "crf_only":
        lstm_fwd = init_lstm(in_dim, cfg.lstm_hidden, rng)
        lstm_bwd = init_lstm(in_dim, cfg.lstm_hidden, rng)
        enc_dim = 2 * cfg.lstm_hidden
    else:
        enc_dim = in_dim
    projection = {"W": neural.glorot(rng, K, enc_dim), "b": np.zeros(K)}
    crf = None if variant == "bilstm_softmax" else init_crf(rng)
    return TaggerModel(variant=variant, embeddings=embeddings, projection=projection,
                       attention=attention, self_attention=self_attention,
                       lstm_fwd=lstm_fwd, lstm_bwd=lstm_bwd, crf=crf,
                       feature_vocabs=feature_vocabs)


def embed_tokens(model: TaggerModel, tokens: list[str],
                 features: dict[str, list[str]] | None = None) -> np.ndarray:
    """(T, input_dim) rows: embedding lookup (zero OOV) ++ one-hot features."""
    if not tokens:
        raise EmptySequence("cannot embed an empty token list")
    features = features or {}
    rows = np.zeros((len(tokens), model.input_dim()))
    for t, word in enumerate(tokens):
        vec = lookup(model.embeddings, word)
        if vec is not None:
            rows[t, : model.embeddings.dim] = vec
    offset = model.embeddings.dim
    # column blocks in sorted feature-name order, independent of dict order
    for name in sorted(model.feature_vocabs):
        vocab = model.feature_vocabs[name]
        values = features.get(name)
        if values is not None:
            if len(values) != len(tokens):
                raise LengthMismatch(
                    f"feature {name!r} has {len(values)} values for {len(tokens)} tokens")
            idx = {v: i for i, v in enumerate(vocab)}
            for t, val in enumerate(values):
                if val in idx:
                    rows[t, offset + idx[val]] = 1.0
        offset += len(vocab)
    return rows


def emission_scores(model: TaggerModel, tokens: list[str],
                    features: dict[str, list[str]] | None = None,
                    return_cache: bool = False):
    """(T, 3) tag scores for the model's variant composition."""
    x = embed_tokens(model, tokens, features)
    cache: dict = {"x": x}
    h = x
    if model.attention is not None:
        _, h, att_cache = attention_apply(model.attention, h, return_cache=True)
        cache["att"] = att_cache
    if model.self_attention is not None:
        h, sa_cache = self_attention_apply(model.self_attention, h, return_cache=True)
        cache["selfatt"] = sa_cache
    if model.lstm_fwd is not None:
        h, bi_cache = bilstm_encode(model.lstm_fwd, model.lstm_bwd, h, return_cache=True)
        cache["bilstm"] = bi_cache
    cache["enc"] = h
    emissions = h @ model.projection["W"].T + model.projection["b"]
    return (emissions, cache) if return_cache else emissions


def _emission_backward(model: TaggerModel, cache, d_emissions) -> Params:
    h = cache["enc"]
    grads = {"proj.W": d_emissions.T @ h, "proj.b": d_emissions.sum(axis=0)}
    dh = d_emissions @ model.projection["W"]
    if model.lstm_fwd is not None:
        dh, g_f, g_b = bilstm_backward(model.lstm_fwd, model.lstm_bwd,
                                       cache["bilstm"], dh)
        grads.update(prefixed("lstm_f", g_f))
        grads.update(prefixed("lstm_b", g_b))
    if model.self_attention is not None:
        dh, g_sa = self_attention_backward(model.self_attention, cache["selfatt"], dh)
        grads.update(prefixed("selfatt", g_sa))
    if model.attention is not None:
        dh, g_att = attention_backward(model.attention, cache["att"], dh)
        grads.update(prefixed("att", g_att))
    return grads


def example_loss_and_grads(model: TaggerModel, item: AnnotatedTweet):
    """Per-example loss and parameter gradients (CRF NLL or token CE)."""
    if item.bio_tags is None:
        raise MissingTags(f"tweet {item.tweet.id!r} has no BIO tags")
    tokens = [t.text for t in item.tweet.tokens or []]
    emissions, cache = emission_scores(model, tokens, item.features, return_cache=True)
    if model.crf is not None:
        loss, d_emissions, crf_grads = crf_nll_grads(emissions, model.crf, item.bio_tags)
        grads = _emission_backward(model, cache, d_emissions)
        grads.update(prefixed("crf", crf_grads))
    else:
        probs = softmax(emissions)
        ids = _tag_ids(item.bio_tags)
        if len(ids) != emissions.shape[0]:
            raise LengthMismatch("tag/token length mismatch")
        loss = float(-np.log(np.clip(probs[np.arange(len(ids)), ids],
                                     neural.P_CLAMP, None)).sum())
        d_emissions = probs
        d_emissions[np.arange(len(ids)), ids] -= 1.0
        grads = _emission_backward(model, cache, d_emissions)
    return loss, grads


def tag(model: TaggerModel, tokens: list[str],
        features: dict[str, list[str]] | None = None) -> list[str]:
    """Decode a token sequence to a well-formed BIO tag list."""
    if not tokens:
        raise EmptySequence("cannot tag an empty token list")
    emissions = emission_scores(model, tokens, features)
    if model.crf is not None:
        return viterbi_decode(emissions, model.crf)
    raw = [TAGS[int(i)] for i in np.argmax(emissions, axis=1)]
    return repair_tags(raw)


def repair_tags(tags: list[str]) -> list[str]:
    """Rewrite any I that follows O (or starts the sequence) to B."""
    repaired = list(tags)
    prev = "O"
    for i, t in enumerate(repaired):
        if t == "I" and prev == "O":
            repaired[i] = "B"
        prev = repaired[i]
    return repaired


def extract_anchors(tokens: list[str], tags: list[str]) -> list[str]:
    """Join each maximal B(I)* run of tokens with single spaces."""
    if len(tokens) != len(tags):
        raise LengthMismatch(f"{len(tokens)} tokens vs {len(tags)} tags")
    spans = bio_to_token_spans(list(tags))
    return [" ".join(tokens[s:e]) for s, e in spans]


# ---------------------------------------------------------------------------
# Training and evaluation
# ---------------------------------------------------------------------------


def _build_feature_vocabs(data: list[AnnotatedTweet], names) -> dict[str, list[str]]:
    vocabs: dict[str, list[str]] = {}
    for name in names:
        values = sorted({v for item in data for v in item.features.get(name, [])})
        vocabs[name] = values
    return vocabs


def train_tagger(split: Split, variant: str, embeddings: EmbeddingTable,
                 cfg: TaggerConfig | None = None, on_epoch=None) -> TaggerModel:
    """Minimize mean per-example loss; keep the best validation span-F1 state."""
    cfg = cfg or TaggerConfig()
    if not split.train:
        raise MissingTags("empty training set")
    for item in split.train + split.val:
        if item.bio_tags is None:
            raise MissingTags(f"tweet {item.tweet.id!r} has no BIO tags")

    vocabs = _build_feature_vocabs(split.train, cfg.feature_names)
    model = init_tagger(variant, embeddings, cfg, vocabs)
    params = model.parameters()
    opt = OptimizerState(kind=cfg.optimizer, learning_rate=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)

    best = clone_params(params)
    best_f1 = -1.0
    stale = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(split.train))
        total = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo: lo + cfg.batch_size]
            summed: Params = {}
            for idx in batch:
                loss, grads = example_loss_and_grads(model, split.train[idx])
                total += loss
                for name, g in grads.items():
                    if name in summed:
                        summed[name] += g
                    else:
                        summed[name] = g
            for name in summed:
                summed[name] /= len(batch)
            optimizer_step(opt, params, summed)
        val_f1 = _validation_span_f1(model, split.val)
        if on_epoch is not None:
            on_epoch(epoch, total / max(1, len(split.train)), val_f1)
        if val_f1 > best_f1:
            best_f1 = val_f1
            best = clone_params(params)
            stale = 0
        else:
            stale += 1
            if stale > cfg.patience:
                break
    for name, value in best.items():
        params[name][...] = value
    return model


def _validation_span_f1(model: TaggerModel, val: list[AnnotatedTweet]) -> float:
    if not val:
        return 0.0
    pred, gold = [], []
    for item in val:
        tokens = [t.text for t in item.tweet.tokens or []]
        if not tokens:
            continue
        pred.append(bio_to_token_spans(tag(model, tokens, item.features)))
        gold.append(bio_to_token_spans(item.bio_tags))
    return evaluate_spans(pred, gold).span.f1


@dataclass
class SpanEval:
    span: Metrics
    token: Metrics


def evaluate_spans(pred_spans, gold_spans, n_tokens=None) -> SpanEval:
    """Exact-match span metrics plus token-level metrics over B/I tokens.

    ``n_tokens`` (per-tweet token counts) makes token-level true negatives
    and accuracy meaningful; without it the token universe is the union of
    predicted and gold span tokens.
    """
    if len(pred_spans) != len(gold_spans):
        raise CorpusMismatch(
            f"{len(pred_spans)} predictions vs {len(gold_spans)} gold")
    if n_tokens is not None and len(n_tokens) != len(gold_spans):
        raise CorpusMismatch("token counts do not align with the corpus")
    s_tp = s_fp = s_fn = 0
    t_tp = t_fp = t_fn = t_tn = 0
    for i, (pred, gold) in enumerate(zip(pred_spans, gold_spans)):
        p_set, g_set = set(pred), set(gold)
        s_tp += len(p_set & g_set)
        s_fp += len(p_set - g_set)
        s_fn += len(g_set - p_set)
        p_tok = {t for s, e in p_set for t in range(s, e)}
        g_tok = {t for s, e in g_set for t in range(s, e)}
        t_tp += len(p_tok & g_tok)
        t_fp += len(p_tok - g_tok)
        t_fn += len(g_tok - p_tok)
        if n_tokens is not None:
            t_tn += n_tokens[i] - len(p_tok | g_tok)
    return SpanEval(
        span=_metrics_from_counts(s_tp, s_fp, s_fn, 0),
        token=_metrics_from_counts(t_tp, t_fp, t_fn, t_tn),
    )


def evaluate_tagging(model: TaggerModel, data: list[AnnotatedTweet]) -> SpanEval:
    """Tag every tweet and score against its gold BIO tags."""
    pred, gold, counts = [], [], []
    for item in data:
        if item.bio_tags is None:
            raise MissingTags(f"tweet {item.tweet.id!r} has no BIO tags")
        tokens = [t.text for t in item.tweet.tokens or []]
        if not tokens:
            continue
        pred.append(bio_to_token_spans(tag(model, tokens, item.features)))
        gold.append(bio_to_token_spans(item.bio_tags))
        counts.append(len(tokens))
    return evaluate_spans(pred, gold, counts)

"""Medical-relevance classification: tfidf features and the 1024/512/256 net.

Two featurizations are supported: plain L2-normalized tfidf vectors and
tfidf-weighted averages of word embeddings. The classifier is a sigmoid
feed-forward net trained with binary cross-entropy; the checkpoint with
the best validation F1 wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import AnnotatedTweet, Split
from .embeddings import EmbeddingTable
from .errors import EmptyCorpus, LengthMismatch, SingleClassTrainingSet
from .neural import (
    DenseNet,
    OptimizerState,
    bce_loss,
    clone_params,
    ffn_backward,
    ffn_forward,
    init_dense_net,
    optimizer_step,
)

MODES = ("tfidf", "weighted")


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    tp: int
    fp: int
    fn: int
    tn: int


def _metrics_from_counts(tp: int, fp: int, fn: int, tn: int) -> Metrics:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 0.0
    return Metrics(precision, recall, f1, accuracy, tp, fp, fn, tn)


@dataclass
class TfidfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    doc_count: int


def fit_tfidf(docs: list[list[str]]) -> TfidfModel:
    """idf(w) = ln((1+N)/(1+df(w))) + 1 over every token seen."""
    if not docs:
        raise EmptyCorpus("tfidf needs at least one document")
    df: dict[str, int] = {}
    for doc in docs:
        for word in set(doc):
            df[word] = df.get(word, 0) + 1
    vocabulary = {w: i for i, w in enumerate(sorted(df))}
    n = len(docs)
    idf = np.empty(len(vocabulary))
    for word, i in vocabulary.items():
        idf[i] = np.log((1.0 + n) / (1.0 + df[word])) + 1.0
    return TfidfModel(vocabulary=vocabulary, idf=idf, doc_count=n)


def tfidf_vector(model: TfidfModel, tokens: list[str]) -> np.ndarray:
    """count * idf entries, L2-normalized; all-unknown input gives zeros."""
    vec = np.zeros(len(model.vocabulary))
    for word in tokens:
        idx = model.vocabulary.get(word)
        if idx is not None:
            vec[idx] += model.idf[idx]
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0.0 else vec


def sentence_vector(model: TfidfModel, embeddings: EmbeddingTable,
                    tokens: list[str]) -> np.ndarray:
    """tfidf-weighted mean of embeddings over tokens known to both models."""
    total = np.zeros(embeddings.dim)
    weight_sum = 0.0
    counts: dict[str, int] = {}
    for word in tokens:
        counts[word] = counts.get(word, 0) + 1
    for word, count in counts.items():
        idx = model.vocabulary.get(word)
        emb_idx = embeddings.index.get(word)
        if idx is None or emb_idx is None:
            continue
        w = count * model.idf[idx]
        total += w * embeddings.vectors[emb_idx]
        weight_sum += w
    return total / weight_sum if weight_sum > 0.0 else total


@dataclass
class RelevanceConfig:
    hidden_dims: tuple[int, ...] = (1024, 512, 256)
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    patience: int = 5
    optimizer: str = "adam"
    seed: int = 0
    decision_threshold: float = 0.5


@dataclass
class RelevanceModel:
    mode: str  # "tfidf" | "weighted"
    tfidf: TfidfModel
    net: DenseNet
    decision_threshold: float = 0.5


def _tokens(item: AnnotatedTweet) -> list[str]:
    return [t.text for t in item.tweet.tokens] if item.tweet.tokens else []


def featurize(model: RelevanceModel, tokens: list[str],
              embeddings: EmbeddingTable | None = None) -> np.ndarray:
    if model.mode == "tfidf":
        return tfidf_vector(model.tfidf, tokens)
    if embeddings is None:
        raise EmptyCorpus("weighted mode needs an embedding table")
    return sentence_vector(model.tfidf, embeddings, tokens)


def predict_relevance(model: RelevanceModel, tokens: list[str],
                      embeddings: EmbeddingTable | None = None):
    """(probability, label); probability at the threshold counts as positive."""
    out = ffn_forward(model.net, featurize(model, tokens, embeddings))
    prob = float(out.reshape(-1)[0])
    return prob, prob >= model.decision_threshold


def evaluate_classifier(preds, golds) -> Metrics:
    """Binary metrics with relevant as the positive class."""
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(golds)} labels")
    tp = fp = fn = tn = 0
    for p, g in zip(preds, golds):
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif not p and g:
            fn += 1
        else:
            tn += 1
    return _metrics_from_counts(tp, fp, fn, tn)


def train_relevance(split: Split, mode: str, cfg: RelevanceConfig | None = None,
                    embeddings: EmbeddingTable | None = None,
                    on_epoch=None) -> RelevanceModel:
    """Fit tfidf on the train docs, then train the net on BCE."""
    cfg = cfg or RelevanceConfig()
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    labels = {bool(t.relevant) for t in split.train}
    if len(labels) < 2:
        raise SingleClassTrainingSet("training set has a single class")
    if mode == "weighted" and embeddings is None:
        raise EmptyCorpus("weighted mode needs an embedding table")

    tfidf = fit_tfidf([_tokens(t) for t in split.train])
    model = RelevanceModel(
        mode=mode, tfidf=tfidf,
        net=DenseNet([], {}),  # replaced below once the input dim is known
        decision_threshold=cfg.decision_threshold,
    )
    input_dim = len(tfidf.vocabulary) if mode == "tfidf" else embeddings.dim
    rng = np.random.default_rng(cfg.seed)
    model.net = init_dense_net([input_dim, *cfg.hidden_dims, 1], rng)

    x_train = np.array([featurize(model, _tokens(t), embeddings) for t in split.train])
    y_train = np.array([1.0 if t.relevant else 0.0 for t in split.train])
    x_val = np.array([featurize(model, _tokens(t), embeddings) for t in split.val]) \
        if split.val else np.zeros((0, input_dim))
    y_val = [bool(t.relevant) for t in split.val]

    opt = OptimizerState(kind=cfg.optimizer, learning_rate=cfg.learning_rate)
    params = model.net.params
    best = clone_params(params)
    best_f1 = -1.0
    stale = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(x_train))
        total = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo: lo + cfg.batch_size]
            probs, cache = ffn_forward(model.net, x_train[batch], return_cache=True)
            p = probs[:, 0]
            y = y_train[batch]
            total += sum(bce_loss(pi, yi) for pi, yi in zip(p, y))
            dz = ((p - y) / len(batch))[:, None]  # fused sigmoid + BCE
            _, grads = ffn_backward(model.net, cache, dz, skip_output_activation=True)
            optimizer_step(opt, params, grads)
        if len(x_val):
            pred = ffn_forward(model.net, x_val)[:, 0] >= model.decision_threshold
            val_f1 = evaluate_classifier(list(pred), y_val).f1
        else:
            val_f1 = 0.0
        if on_epoch is not None:
            on_epoch(epoch, total / max(1, len(x_train)), val_f1)
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

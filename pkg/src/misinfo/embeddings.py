"""Word vector tables: text-format IO, lookup/cosine, skip-gram training.

Training is plain skip-gram with negative sampling, single-threaded and
fully determined by (corpus, config, seed). Frequent-word subsampling is
deliberately omitted at this corpus scale.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateWord,
    EmptyVocabulary,
    MalformedHeader,
)


@dataclass
class EmbeddingTable:
    dim: int
    vocab: list[str]
    vectors: np.ndarray  # (|vocab|, dim) float64

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.vocab)}

    def __contains__(self, word: str) -> bool:
        return word in self.index


@dataclass
class SkipgramConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    min_count: int = 2
    seed: int = 0


def load_embeddings(path) -> EmbeddingTable:
    """Parse "<vocab_size> <dim>" header plus one "word v1 .. vdim" row per line."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise MalformedHeader(f"expected '<vocab_size> <dim>', got {header!r}")
        try:
            size, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise MalformedHeader(f"non-integer header {header!r}") from None
        if size < 0 or dim <= 0:
            raise MalformedHeader(f"bad sizes in header {header!r}")
        vocab: list[str] = []
        seen: set[str] = set()
        rows = np.empty((size, dim), dtype=np.float64)
        count = 0
        for line_no, line in enumerate(fh, 2):
            if line.strip() == "":
                continue
            fields = line.rstrip("\n").split(" ")
            word, values = fields[0], fields[1:]
            if word in seen:
                raise DuplicateWord(word)
            if len(values) != dim:
                raise DimensionMismatch(
                    f"line {line_no}: expected {dim} values, got {len(values)}")
            if count >= size:
                raise DimensionMismatch(
                    f"line {line_no}: more rows than the declared {size}")
            try:
                rows[count] = [float(v) for v in values]
            except ValueError:
                raise DimensionMismatch(f"line {line_no}: non-numeric value") from None
            seen.add(word)
            vocab.append(word)
            count += 1
    if count != size:
        raise DimensionMismatch(f"declared {size} rows, found {count}")
    return EmbeddingTable(dim=dim, vocab=vocab, vectors=rows)


def save_embeddings(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.vocab)} {table.dim}\n")
        for word, row in zip(table.vocab, table.vectors):
            fh.write(word + " " + " ".join(repr(float(v)) for v in row) + "\n")


def lookup(table: EmbeddingTable, word: str):
    """The word's vector, or None when out of vocabulary."""
    idx = table.index.get(word)
    return None if idx is None else table.vectors[idx]


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"cosine over shapes {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def _log_sigmoid(x: float) -> float:
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


def train_skipgram(sentences, cfg: SkipgramConfig, on_epoch=None) -> EmbeddingTable:
    """Train input-side vectors; negatives drawn from unigram^0.75.

    ``on_epoch(epoch, average_loss)`` is invoked after each pass when given.
    """
    counts = Counter(w for sent in sentences for w in sent)
    vocab = sorted((w for w, c in counts.items() if c >= cfg.min_count),
                   key=lambda w: (-counts[w], w))
    if not vocab:
        raise EmptyVocabulary(
            f"no word appears at least min_count={cfg.min_count} times")
    index = {w: i for i, w in enumerate(vocab)}

    rng = np.random.default_rng(cfg.seed)
    vec_in = rng.uniform(-0.5 / cfg.dim, 0.5 / cfg.dim, size=(len(vocab), cfg.dim))
    vec_out = np.zeros((len(vocab), cfg.dim))

    noise = np.array([counts[w] for w in vocab], dtype=np.float64) ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())

    filtered = [[index[w] for w in sent if w in index] for sent in sentences]
    pairs_per_epoch = 0
    for sent in filtered:
        for pos in range(len(sent)):
            lo = max(0, pos - cfg.window)
            hi = min(len(sent), pos + cfg.window + 1)
            pairs_per_epoch += hi - lo - 1
    total_steps = max(1, cfg.epochs * pairs_per_epoch)

    step = 0
    for epoch in range(cfg.epochs):
        total_loss = 0.0
        n_pairs = 0
        for sent in filtered:
            for pos, center in enumerate(sent):
                lo = max(0, pos - cfg.window)
                hi = min(len(sent), pos + cfg.window + 1)
                for ctx_pos in range(lo, hi):
                    if ctx_pos == pos:
                        continue
                    context = sent[ctx_pos]
                    lr = cfg.learning_rate + (
                        cfg.min_learning_rate - cfg.learning_rate) * (step / total_steps)
                    step += 1
                    v = vec_in[center]
                    grad_v = np.zeros(cfg.dim)

                    z = float(vec_out[context] @ v)
                    total_loss -= _log_sigmoid(z)
                    g = _sigmoid(z) - 1.0
                    grad_v += g * vec_out[context]
                    vec_out[context] -= lr * g * v

                    draws = np.minimum(
                        np.searchsorted(noise_cdf, rng.random(cfg.negatives)),
                        len(vocab) - 1)
                    for neg in draws:
                        if neg == context:
                            continue
                        zn = float(vec_out[neg] @ v)
                        total_loss -= _log_sigmoid(-zn)
                        gn = _sigmoid(zn)
                        grad_v += gn * vec_out[neg]
                        vec_out[neg] -= lr * gn * v

                    vec_in[center] -= lr * grad_v
                    n_pairs += 1
        if on_epoch is not None:
            on_epoch(epoch, total_loss / max(1, n_pairs))

    return EmbeddingTable(dim=cfg.dim, vocab=vocab, vectors=vec_in)

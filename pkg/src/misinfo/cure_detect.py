"""Cure-claim screening against the proven-treatment set in embedding space.

A tweet about curing cancer is flagged as a misinformation candidate when
none of its unigrams or adjacent bigrams lands close enough (cosine above
the threshold) to any proven treatment vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .embeddings import EmbeddingTable, cosine, lookup

PROVEN_CURES = (
    "chemotherapy",
    "radiation therapy",
    "immunotherapy",
    "targeted therapy",
    "hormone therapy",
)


@dataclass
class CureLexicon:
    terms: list[str]
    vectors: np.ndarray  # (len(terms), dim)


@dataclass
class CureConfig:
    threshold: float = 0.60

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")


class CureVerdict(Enum):
    PROVEN_CURE_PRESENT = "proven_cure_present"
    MISINFO_CANDIDATE = "misinfo_candidate"


def term_vector(embeddings: EmbeddingTable, term: str) -> np.ndarray:
    """Mean of the constituent word vectors; OOV words contribute zeros."""
    total = np.zeros(embeddings.dim)
    words = term.split()
    for word in words:
        vec = lookup(embeddings, word)
        if vec is not None:
            total += vec
    return total / max(1, len(words))


def build_lexicon(embeddings: EmbeddingTable, terms=PROVEN_CURES) -> CureLexicon:
    terms = list(terms)
    vectors = np.array([term_vector(embeddings, t) for t in terms])
    return CureLexicon(terms=terms, vectors=vectors)


def load_cure_terms(path) -> list[str]:
    """One term per line; blank lines ignored."""
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def cure_score(word_vector, lexicon: CureLexicon,
               cfg: CureConfig | None = None) -> tuple[float, float]:
    """(best cosine against the cure set, the decision threshold)."""
    cfg = cfg or CureConfig()
    s1 = max(cosine(word_vector, row) for row in lexicon.vectors)
    return s1, cfg.threshold


@dataclass(frozen=True)
class CureHit:
    start: int  # token index
    end: int    # exclusive; start+1 for unigrams, start+2 for bigrams
    score: float


def detect_cure_anchor(tokens: list[str], embeddings: EmbeddingTable,
                       lexicon: CureLexicon,
                       cfg: CureConfig | None = None) -> list[CureHit]:
    """Unigram and adjacent-bigram hits scoring strictly above the threshold.

    Bigrams use the mean of the two token vectors so multiword treatments
    like "radiation therapy" match exactly. Sorted by descending score.
    """
    cfg = cfg or CureConfig()
    vectors = [lookup(embeddings, tok) for tok in tokens]
    vectors = [np.zeros(embeddings.dim) if v is None else v for v in vectors]
    hits: list[CureHit] = []
    for i, vec in enumerate(vectors):
        s1, tau = cure_score(vec, lexicon, cfg)
        if s1 > tau:
            hits.append(CureHit(i, i + 1, s1))
    for i in range(len(vectors) - 1):
        s1, tau = cure_score((vectors[i] + vectors[i + 1]) / 2.0, lexicon, cfg)
        if s1 > tau:
            hits.append(CureHit(i, i + 2, s1))
    hits.sort(key=lambda h: (-h.score, h.start, h.end))
    return hits


def classify_cure_misinfo(tokens: list[str], embeddings: EmbeddingTable,
                          lexicon: CureLexicon,
                          cfg: CureConfig | None = None) -> CureVerdict:
    """Misinformation candidate iff no token is similar to a proven cure."""
    if detect_cure_anchor(tokens, embeddings, lexicon, cfg):
        return CureVerdict.PROVEN_CURE_PRESENT
    return CureVerdict.MISINFO_CANDIDATE

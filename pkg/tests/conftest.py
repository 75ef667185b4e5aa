"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from misinfo.corpus import AnnotatedTweet, Token, Tweet
from misinfo.embeddings import EmbeddingTable
from misinfo.preprocess import tokenize
from misinfo.tagger import TAGS


# ---------------------------------------------------------------------------
# Gradient-check oracle
# ---------------------------------------------------------------------------


def finite_difference_max_rel_error(loss_fn, params: dict, analytic: dict,
                                    h: float = 1e-5) -> float:
    """Central differences against analytic gradients over every entry.

    The relative-error denominator is floored at 1e-6 times the loss
    magnitude: central differences of a loss L carry cancellation noise of
    order |L|*eps/h (~1e-11*|L| here), so gradients at or below that scale
    are judged on absolute agreement rather than a blown-up ratio.
    """
    floor = 1e-6 * max(1.0, abs(loss_fn()))
    worst = 0.0
    for name, arr in params.items():
        grad = analytic[name]
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            lp = loss_fn()
            arr[idx] = orig - h
            lm = loss_fn()
            arr[idx] = orig
            num = (lp - lm) / (2.0 * h)
            denom = max(abs(num), abs(grad[idx]), floor)
            worst = max(worst, abs(num - grad[idx]) / denom)
    return worst


# ---------------------------------------------------------------------------
# Brute-force CRF oracle (independent of the forward/viterbi implementation)
# ---------------------------------------------------------------------------


def enumerate_path_scores(emissions, transitions, start, end):
    """(path, score) for every tag path, in lexicographic path order."""
    T = emissions.shape[0]
    out = []
    for path in itertools.product(range(3), repeat=T):
        score = start[path[0]] + emissions[0, path[0]]
        for t in range(1, T):
            score += transitions[path[t - 1], path[t]] + emissions[t, path[t]]
        score += end[path[-1]]
        out.append((path, score))
    return out


def brute_force_log_partition(emissions, crf) -> float:
    scores = [s for _, s in enumerate_path_scores(
        emissions, crf.transitions, crf.start_scores, crf.end_scores)]
    m = max(scores)
    return m + math.log(sum(math.exp(s - m) for s in scores))


def brute_force_viterbi(emissions, crf) -> list[str]:
    """Max-score well-formed path; first (lexicographically smallest) wins ties."""
    best_score = None
    best_path = None
    for path, score in enumerate_path_scores(
            emissions, crf.transitions, crf.start_scores, crf.end_scores):
        if path[0] == 1:
            continue
        if any(path[t - 1] == 2 and path[t] == 1 for t in range(1, len(path))):
            continue
        if best_score is None or score > best_score:
            best_score, best_path = score, path
    return [TAGS[i] for i in best_path]


# ---------------------------------------------------------------------------
# Student-t quadrature oracle
# ---------------------------------------------------------------------------


def t_density(u: float, df: float) -> float:
    log_norm = (math.lgamma((df + 1) / 2.0) - math.lgamma(df / 2.0)
                - 0.5 * math.log(df * math.pi))
    return math.exp(log_norm - (df + 1) / 2.0 * math.log1p(u * u / df))


def _simpson(f, a, b, fa, fm, fb, tol, depth):
    m = (a + b) / 2.0
    lm, rm = (a + m) / 2.0, (m + b) / 2.0
    flm, frm = f(lm), f(rm)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    if depth <= 0 or abs(left + right - whole) < 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return (_simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1)
            + _simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1))


def two_tailed_p_by_quadrature(t: float, df: float, tol: float = 1e-10) -> float:
    """p = 1 - 2 * integral of the t density over [0, |t|], adaptive Simpson."""
    a, b = 0.0, abs(t)
    if b == 0.0:
        return 1.0
    f = lambda u: t_density(u, df)
    integral = _simpson(f, a, b, f(a), f((a + b) / 2.0), f(b), tol, 40)
    return 1.0 - 2.0 * integral


# ---------------------------------------------------------------------------
# Synthetic corpora and tables
# ---------------------------------------------------------------------------


def make_tweet(tweet_id: str, text: str, category: str = "cause") -> Tweet:
    return Tweet(tweet_id, text, category, clean_text=text, tokens=tokenize(text))


def make_annotated(tweet_id: str, text: str, spans=(), relevant=True,
                   category="cause", misinfo=None) -> AnnotatedTweet:
    return AnnotatedTweet(tweet=make_tweet(tweet_id, text, category),
                          relevant=relevant, anchor_spans=list(spans),
                          misinfo=misinfo)


@pytest.fixture
def small_embeddings() -> EmbeddingTable:
    rng = np.random.default_rng(99)
    vocab = ["meat", "causes", "cancer", "sun", "cure", "coffee", "doctors",
             "say", "today", "really"]
    return EmbeddingTable(dim=6, vocab=vocab,
                          vectors=rng.normal(size=(len(vocab), 6)) * 0.5)


def orthonormal_cure_table() -> EmbeddingTable:
    """Cure words on orthonormal axes; fakes orthogonal to every cure term."""
    words = ["chemotherapy", "radiation", "therapy", "immunotherapy",
             "targeted", "hormone", "carrot", "juice", "dog", "urine",
             "cures", "cancer", "radiotherapy", "noise"]
    dim = len(words)
    vectors = np.eye(dim)
    table = EmbeddingTable(dim=dim, vocab=words, vectors=vectors)
    # "radiotherapy": 0.8 toward the radiation-therapy direction, 0.6 noise
    rad = (vectors[words.index("radiation")] + vectors[words.index("therapy")])
    rad = rad / np.linalg.norm(rad)
    blend = 0.8 * rad + 0.6 * vectors[words.index("noise")]
    table.vectors[words.index("radiotherapy")] = blend
    return table

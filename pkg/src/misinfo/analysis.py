"""Keyword-spread estimation and linguistic comparison of tweet groups.

Features come from categorical lexicons (fraction of tokens in a category,
'*' suffix terms match by prefix) and scalar lexicons (mean of per-word
dimensions such as valence/arousal/dominance). Group differences are
scored with Welch t-tests on per-tweet values and signed log odds ratios
on binarized presence; positive log odds means over-represented in the
misinformed group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DegenerateSamples, GroupTooSmall, InvalidCounts
from .preprocess import stem


@dataclass
class Lexicon:
    kind: str  # "categorical" | "scalar"
    name: str = ""
    categories: dict[str, set[str]] = field(default_factory=dict)
    scalar: dict[str, dict[str, float]] = field(default_factory=dict)

    def feature_names(self) -> list[str]:
        if self.kind == "categorical":
            keys = sorted(self.categories)
        else:
            dims = {d for dims in self.scalar.values() for d in dims}
            keys = sorted(dims)
        prefix = f"{self.name}:" if self.name else ""
        return [prefix + k for k in keys]


def load_lexicon(path, name: str = "") -> Lexicon:
    """TSV loader: "category<TAB>term" lines, or "term<TAB>dim=val..." lines."""
    categories: dict[str, set[str]] = {}
    scalar: dict[str, dict[str, float]] = {}
    kind = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if kind is None:
                kind = "scalar" if len(fields) > 1 and "=" in fields[1] else "categorical"
            if kind == "categorical":
                cat, term = fields[0], fields[1]
                categories.setdefault(cat, set()).add(term)
            else:
                term = fields[0]
                dims = {}
                for part in fields[1:]:
                    key, _, value = part.partition("=")
                    dims[key] = float(value)
                scalar[term] = dims
    return Lexicon(kind=kind or "categorical", name=name,
                   categories=categories, scalar=scalar)


def _matches(token: str, terms: set[str]) -> bool:
    if token in terms:
        return True
    return any(t.endswith("*") and token.startswith(t[:-1]) for t in terms)


def lexicon_features(tokens: list[str], lexicons: list[Lexicon]) -> dict[str, float]:
    """Feature map for one tweet; tokens are expected lowercase."""
    features: dict[str, float] = {}
    for lex in lexicons:
        prefix = f"{lex.name}:" if lex.name else ""
        if lex.kind == "categorical":
            for cat in sorted(lex.categories):
                hits = sum(1 for t in tokens if _matches(t, lex.categories[cat]))
                features[prefix + cat] = hits / len(tokens) if tokens else 0.0
        else:
            dims = sorted({d for v in lex.scalar.values() for d in v})
            sums = {d: 0.0 for d in dims}
            count = 0
            for t in tokens:
                entry = lex.scalar.get(t)
                if entry is not None:
                    count += 1
                    for d, v in entry.items():
                        sums[d] += v
            for d in dims:
                features[prefix + d] = sums[d] / count if count else 0.0
    return features


def welch_ttest(a, b) -> tuple[float, float, float]:
    """Welch's unequal-variance t with Welch-Satterthwaite df; two-tailed p."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise DegenerateSamples("both samples need at least 2 observations")
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        raise DegenerateSamples("both samples have zero variance")
    sa, sb = va / len(a), vb / len(b)
    t = (a.mean() - b.mean()) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa ** 2 / (len(a) - 1) + sb ** 2 / (len(b) - 1))
    # two-tailed survival of |t| under Student t: I_{df/(df+t^2)}(df/2, 1/2)
    p = float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))
    return float(t), float(df), p


def signed_log_odds(misinfo: tuple[int, int], correct: tuple[int, int]) -> float:
    """ln of the +0.5-corrected odds ratio; positive leans misinformed."""
    a, total_a = misinfo
    b, total_b = correct
    if total_a <= 0 or total_b <= 0:
        raise InvalidCounts("totals must be positive")
    if not (0 <= a <= total_a and 0 <= b <= total_b):
        raise InvalidCounts("present counts must lie within totals")
    odds_a = (a + 0.5) / (total_a - a + 0.5)
    odds_b = (b + 0.5) / (total_b - b + 0.5)
    # difference of logs keeps antisymmetry exact under argument swap
    return math.log(odds_a) - math.log(odds_b)


@dataclass
class GroupComparison:
    feature: str
    mean_misinfo: float
    mean_correct: float
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    signed_log_odds: float
    significant: bool


def compare_feature(name: str, a, b) -> GroupComparison:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    try:
        t, df, p = welch_ttest(a, b)
    except DegenerateSamples:
        # constant feature in both groups: no evidence either way unless the
        # constants differ, which is then infinitely separated
        if a.mean() == b.mean():
            t, df, p = 0.0, 0.0, 1.0
        else:
            t, df, p = math.copysign(math.inf, a.mean() - b.mean()), 0.0, 0.0
    slo = signed_log_odds(
        (int(np.count_nonzero(a > 0)), len(a)),
        (int(np.count_nonzero(b > 0)), len(b)),
    )
    return GroupComparison(
        feature=name,
        mean_misinfo=float(a.mean()),
        mean_correct=float(b.mean()),
        t_statistic=t,
        degrees_of_freedom=df,
        p_value=p,
        signed_log_odds=slo,
        significant=p < 0.05,
    )


def compare_groups(misinfo_token_lists: list[list[str]],
                   correct_token_lists: list[list[str]],
                   lexicons: list[Lexicon]) -> list[GroupComparison]:
    """Per-feature statistics between the two groups, largest |log odds| first."""
    if len(misinfo_token_lists) < 2 or len(correct_token_lists) < 2:
        raise GroupTooSmall("each group needs at least 2 tweets")
    names = [n for lex in lexicons for n in lex.feature_names()]
    feats_a = [lexicon_features(toks, lexicons) for toks in misinfo_token_lists]
    feats_b = [lexicon_features(toks, lexicons) for toks in correct_token_lists]
    rows = []
    for name in names:
        a = [f[name] for f in feats_a]
        b = [f[name] for f in feats_b]
        rows.append(compare_feature(name, a, b))
    rows.sort(key=lambda r: (-abs(r.signed_log_odds), r.feature))
    return rows


# ---------------------------------------------------------------------------
# Keyword spread
# ---------------------------------------------------------------------------


def stem_anchor(anchor: str) -> str:
    """Lowercase, Porter-stem each whitespace token, rejoin with spaces."""
    return " ".join(stem(w) for w in anchor.lower().split())


def top_keywords(anchors: list[str], k: int) -> list[tuple[str, int]]:
    """Top-k stemmed anchors by count; ties broken lexicographically."""
    counts: dict[str, int] = {}
    for anchor in anchors:
        key = stem_anchor(anchor)
        if key:
            counts[key] = counts.get(key, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[: max(0, k)]


def keyword_spread(anchor_lists: list[list[str]], misinfo_stems: set[str],
                   top_stems: set[str] | None = None) -> float:
    """Fraction of top-keyword tweets whose anchors hit the misinformation set.

    A tweet enters the denominator when any of its stemmed anchors is in
    ``top_stems`` (every anchored tweet when omitted), and the numerator
    when additionally one of them is in ``misinfo_stems``.
    """
    denom = 0
    numer = 0
    for anchors in anchor_lists:
        stems = {stem_anchor(a) for a in anchors}
        stems.discard("")
        if not stems:
            continue
        if top_stems is not None and not (stems & top_stems):
            continue
        denom += 1
        if stems & misinfo_stems:
            numer += 1
    return numer / denom if denom else 0.0

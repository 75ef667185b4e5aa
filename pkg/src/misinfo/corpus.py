"""Tweet corpus ingestion, annotation merging, BIO conversion and splits.

File format is JSON Lines: one object per line with required keys "id",
"text", "category" ("cause"|"cure"|"prevent") and optional keys "relevant"
(single boolean or 3-vote boolean array), "anchors" ([[start, end], ...]
byte spans into the cleaned text), "misinfo" (boolean), "clean" (string)
and "tokens" ([{"text","start","end"}, ...]). Per-token "pos"/"deptag"
string arrays may be supplied for feature-augmented taggers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import (
    DuplicateId,
    LengthMismatch,
    MalformedRecord,
    MalformedTags,
    SpanOutOfBounds,
    TooFewExamples,
    WrongArity,
)

CATEGORIES = ("cause", "cure", "prevent")
BIO_TAGS = ("B", "I", "O")


@dataclass(frozen=True)
class Token:
    text: str
    start: int  # byte offset into the UTF-8 cleaned text
    end: int    # exclusive


@dataclass
class Tweet:
    id: str
    raw_text: str
    category: str
    clean_text: str | None = None
    tokens: list[Token] | None = None


@dataclass
class AnnotatedTweet:
    tweet: Tweet
    relevant: bool
    anchor_spans: list[tuple[int, int]] = field(default_factory=list)
    bio_tags: list[str] | None = None
    misinfo: bool | None = None
    features: dict[str, list[str]] = field(default_factory=dict)


@dataclass
class Split:
    train: list[AnnotatedTweet]
    val: list[AnnotatedTweet]
    seed: int


def merge_annotations(votes: list[bool]) -> bool:
    """Majority vote over exactly three annotator booleans."""
    if len(votes) != 3:
        raise WrongArity(f"expected 3 votes, got {len(votes)}")
    return sum(bool(v) for v in votes) >= 2


def is_well_formed(tags: list[str]) -> bool:
    """True iff no I is preceded by O or starts the sequence."""
    prev = "O"
    for tag in tags:
        if tag == "I" and prev == "O":
            return False
        prev = tag
    return True


def spans_to_bio(tokens: list[Token], spans: list[tuple[int, int]]) -> list[str]:
    """Project byte spans onto tokens as B/I/O tags.

    A token counts as inside a span if their byte ranges overlap at all;
    the first overlapping token of each span gets B, the rest I.
    """
    max_end = tokens[-1].end if tokens else 0
    for start, end in spans:
        if start < 0 or start >= end or end > max_end:
            raise SpanOutOfBounds(f"span ({start}, {end}) outside tokenized text")
    tags = ["O"] * len(tokens)
    for start, end in spans:
        first = True
        for i, tok in enumerate(tokens):
            if tok.start < end and start < tok.end:
                tags[i] = "B" if first else "I"
                first = False
    return tags


def bio_to_token_spans(tags: list[str]) -> list[tuple[int, int]]:
    """Maximal B(I)* runs as (start, end) token-index spans, end exclusive."""
    if not is_well_formed(tags):
        raise MalformedTags("I tag not preceded by B or I")
    spans: list[tuple[int, int]] = []
    start = None
    for i, tag in enumerate(tags):
        if tag == "B":
            if start is not None:
                spans.append((start, i))
            start = i
        elif tag == "O":
            if start is not None:
                spans.append((start, i))
                start = None
    if start is not None:
        spans.append((start, len(tags)))
    return spans


class _Lcg64:
    """64-bit linear congruential generator (Knuth MMIX constants).

    state' = (6364136223846793003 * state + 1442695040888963407) mod 2^64;
    bounded draws use the top 32 bits mod n. Documented so splits can be
    reproduced outside this package.
    """

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self._MASK

    def below(self, n: int) -> int:
        self.state = (6364136223846793003 * self.state + 1442695040888963407) & self._MASK
        return (self.state >> 32) % n


def _fisher_yates(items: list, rng: _Lcg64) -> None:
    for i in range(len(items) - 1, 0, -1):
        j = rng.below(i + 1)
        items[i], items[j] = items[j], items[i]


def split_dataset(data: list[AnnotatedTweet], seed: int) -> Split:
    """Seeded 4:1 train/validation split, stratified on the relevant flag.

    val size = floor(n/5); each class contributes its proportional share
    (within one example). The same seed always yields the same Split.
    """
    n = len(data)
    if n < 5:
        raise TooFewExamples(f"need at least 5 examples, got {n}")
    val_total = n // 5

    order = list(range(n))
    _fisher_yates(order, _Lcg64(seed))

    n_pos = sum(1 for t in data if t.relevant)
    n_neg = n - n_pos
    quota = {True: min(int(val_total * n_pos / n), n_pos)}
    quota[False] = min(val_total - quota[True], n_neg)
    # only reachable when a class runs out of examples
    while quota[True] + quota[False] < val_total:
        if quota[True] < n_pos:
            quota[True] += 1
        else:
            quota[False] += 1

    train: list[AnnotatedTweet] = []
    val: list[AnnotatedTweet] = []
    taken = {True: 0, False: 0}
    for idx in order:
        item = data[idx]
        cls = bool(item.relevant)
        if taken[cls] < quota[cls]:
            val.append(item)
            taken[cls] += 1
        else:
            train.append(item)
    return Split(train=train, val=val, seed=seed)


# ---------------------------------------------------------------------------
# JSON Lines IO
# ---------------------------------------------------------------------------


def _parse_tokens(raw, line_no: int) -> list[Token]:
    tokens = []
    for item in raw:
        try:
            tokens.append(Token(str(item["text"]), int(item["start"]), int(item["end"])))
        except (TypeError, KeyError, ValueError):
            raise MalformedRecord(line_no, "bad token entry") from None
    return tokens


def _parse_record(line: str, line_no: int) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record is not an object")
    return obj


def _tweet_from_record(obj: dict, line_no: int) -> Tweet:
    for key in ("id", "text", "category"):
        if key not in obj:
            raise MalformedRecord(line_no, f"missing {key!r} field")
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise MalformedRecord(line_no, "id must be a non-empty string")
    if not isinstance(obj["text"], str):
        raise MalformedRecord(line_no, "text must be a string")
    if obj["category"] not in CATEGORIES:
        raise MalformedRecord(line_no, f"unknown category {obj['category']!r}")
    clean = obj.get("clean")
    if clean is not None and not isinstance(clean, str):
        raise MalformedRecord(line_no, "clean must be a string")
    tokens = None
    if obj.get("tokens") is not None:
        tokens = _parse_tokens(obj["tokens"], line_no)
    return Tweet(id=obj["id"], raw_text=obj["text"], category=obj["category"],
                 clean_text=clean, tokens=tokens)


def _annotations_from_record(obj: dict, tweet: Tweet, line_no: int) -> AnnotatedTweet:
    raw_rel = obj.get("relevant")
    if isinstance(raw_rel, list):
        if len(raw_rel) != 3:
            raise MalformedRecord(line_no, "relevant vote array must have 3 entries")
        relevant = merge_annotations([bool(v) for v in raw_rel])
    elif isinstance(raw_rel, bool):
        relevant = raw_rel
    elif raw_rel is None:
        relevant = bool(obj.get("anchors"))
    else:
        raise MalformedRecord(line_no, "relevant must be a boolean or 3-vote array")

    spans: list[tuple[int, int]] = []
    prev_end = -1
    for entry in obj.get("anchors") or []:
        if not (isinstance(entry, (list, tuple)) and len(entry) == 2):
            raise MalformedRecord(line_no, "anchor spans must be [start, end] pairs")
        start, end = int(entry[0]), int(entry[1])
        if start < 0 or start >= end:
            raise MalformedRecord(line_no, f"bad anchor span ({start}, {end})")
        if start < prev_end:
            raise MalformedRecord(line_no, "anchor spans must be sorted and non-overlapping")
        if tweet.clean_text is not None and end > len(tweet.clean_text.encode("utf-8")):
            raise MalformedRecord(line_no, "anchor span outside cleaned text")
        spans.append((start, end))
        prev_end = end

    if not relevant and spans:
        raise MalformedRecord(line_no, "non-relevant tweet has anchor spans")

    misinfo = obj.get("misinfo")
    if misinfo is not None and not isinstance(misinfo, bool):
        raise MalformedRecord(line_no, "misinfo must be a boolean")

    features: dict[str, list[str]] = {}
    for key in ("pos", "deptag"):
        if obj.get(key) is not None:
            features[key] = [str(v) for v in obj[key]]

    return AnnotatedTweet(tweet=tweet, relevant=relevant, anchor_spans=spans,
                          misinfo=misinfo, features=features)


def load_tweets(path) -> list[Tweet]:
    """Read one Tweet per JSONL line, preserving order; ids must be unique."""
    tweets: list[Tweet] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            try:
                if line.strip() == "":
                    raise MalformedRecord(line_no, "blank line")
                tweet = _tweet_from_record(_parse_record(line, line_no), line_no)
            except MalformedRecord as exc:
                raise MalformedRecord(exc.line_no, exc.reason, path) from None
            if tweet.id in seen:
                raise DuplicateId(tweet.id)
            seen.add(tweet.id)
            tweets.append(tweet)
    return tweets


def load_annotated(path) -> list[AnnotatedTweet]:
    """Read AnnotatedTweets; a missing "relevant" key defaults to anchor presence."""
    annotated: list[AnnotatedTweet] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            try:
                if line.strip() == "":
                    raise MalformedRecord(line_no, "blank line")
                obj = _parse_record(line, line_no)
                tweet = _tweet_from_record(obj, line_no)
                item = _annotations_from_record(obj, tweet, line_no)
            except MalformedRecord as exc:
                raise MalformedRecord(exc.line_no, exc.reason, path) from None
            if tweet.id in seen:
                raise DuplicateId(tweet.id)
            seen.add(tweet.id)
            annotated.append(item)
    return annotated


def to_record(item: Tweet | AnnotatedTweet) -> dict:
    """Serializable JSONL record for a (possibly annotated) tweet."""
    if isinstance(item, AnnotatedTweet):
        tweet = item.tweet
    else:
        tweet = item
    rec: dict = {"id": tweet.id, "text": tweet.raw_text, "category": tweet.category}
    if tweet.clean_text is not None:
        rec["clean"] = tweet.clean_text
    if tweet.tokens is not None:
        rec["tokens"] = [{"text": t.text, "start": t.start, "end": t.end} for t in tweet.tokens]
    if isinstance(item, AnnotatedTweet):
        rec["relevant"] = item.relevant
        if item.anchor_spans:
            rec["anchors"] = [[s, e] for s, e in item.anchor_spans]
        if item.misinfo is not None:
            rec["misinfo"] = item.misinfo
        for key, vals in item.features.items():
            rec[key] = vals
    return rec


def write_jsonl(path, items) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(to_record(item), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def save_split_manifest(split: Split, path) -> None:
    manifest = {
        "seed": split.seed,
        "train_ids": [t.tweet.id for t in split.train],
        "val_ids": [t.tweet.id for t in split.val],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def apply_split_manifest(data: list[AnnotatedTweet], manifest: dict) -> Split:
    by_id = {t.tweet.id: t for t in data}
    missing = [i for i in manifest["train_ids"] + manifest["val_ids"] if i not in by_id]
    if missing:
        raise LengthMismatch(f"manifest ids not in corpus: {missing[:3]}")
    return Split(
        train=[by_id[i] for i in manifest["train_ids"]],
        val=[by_id[i] for i in manifest["val_ids"]],
        seed=int(manifest.get("seed", 0)),
    )


def with_bio_tags(item: AnnotatedTweet) -> AnnotatedTweet:
    """Return a copy carrying BIO tags derived from its anchor spans."""
    if item.tweet.tokens is None:
        raise MalformedTags(f"tweet {item.tweet.id!r} is not tokenized")
    try:
        tags = spans_to_bio(item.tweet.tokens, item.anchor_spans)
    except SpanOutOfBounds as exc:
        raise SpanOutOfBounds(f"tweet {item.tweet.id!r}: {exc}") from None
    return replace(item, bio_tags=tags)

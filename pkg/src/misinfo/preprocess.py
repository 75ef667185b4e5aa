"""Tweet text cleanup, hashtag segmentation, tokenization and stemming.

All functions are pure. Offsets produced by :func:`tokenize` are byte
offsets into the UTF-8 encoding of the cleaned text, so annotation spans
stay valid regardless of the reader's string representation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import Token
from .errors import NotAHashtag

# Codepoint ranges stripped as "emoticons" (inclusive). ASCII-art smileys
# like :-) are deliberately left alone.
EMOJI_RANGES = (
    (0x1F300, 0x1F5FF),
    (0x1F600, 0x1F64F),
    (0x1F680, 0x1F6FF),
    (0x1F900, 0x1F9FF),
    (0x2600, 0x26FF),
    (0x2700, 0x27BF),
    (0xFE0F, 0xFE0F),
    (0x200D, 0x200D),
)

_URL_RE = re.compile(r"https?://\S*")
_MENTION_RE = re.compile(r"@\w+")
_WS_RE = re.compile(r"\s+")
_CHUNK_RE = re.compile(r"\S+")


@dataclass
class CleanConfig:
    strip_urls: bool = True
    strip_mentions: bool = True
    strip_emoticons: bool = True
    keep_hashtag_mark: bool = False


def _is_emoji(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in EMOJI_RANGES)


def clean(text: str, cfg: CleanConfig | None = None) -> str:
    """Strip URLs, @-mentions and emoji codepoints; collapse whitespace."""
    cfg = cfg or CleanConfig()
    if cfg.strip_urls:
        text = _URL_RE.sub(" ", text)
    if cfg.strip_mentions:
        text = _MENTION_RE.sub(" ", text)
    if cfg.strip_emoticons:
        text = "".join(ch for ch in text if not _is_emoji(ch))
    return _WS_RE.sub(" ", text).strip()


def segment_hashtag(token: str, keep_hashtag_mark: bool = False) -> list[str]:
    """Split a #CamelCase hashtag into lowercased word segments.

    Boundaries are lower->upper transitions, letter<->digit transitions,
    and the final letter of an uppercase run when followed by lowercase
    (so "#WHOSays" gives ["who", "says"]). With ``keep_hashtag_mark`` the
    '#' stays attached to the first segment.
    """
    if not token.startswith("#"):
        raise NotAHashtag(f"not a hashtag: {token!r}")
    body = token[1:]
    segments: list[str] = []
    start = 0
    for i in range(1, len(body)):
        prev, cur = body[i - 1], body[i]
        boundary = False
        if prev.islower() and cur.isupper():
            boundary = True
        elif prev.isalpha() and cur.isdigit():
            boundary = True
        elif prev.isdigit() and cur.isalpha():
            boundary = True
        elif prev.isupper() and cur.islower() and i >= 2 and body[i - 2].isupper():
            # end of an uppercase run: its last letter opens the new segment
            start_of_last = i - 1
            if start_of_last > start:
                segments.append(body[start:start_of_last].lower())
                start = start_of_last
            continue
        if boundary:
            segments.append(body[start:i].lower())
            start = i
    if start < len(body):
        segments.append(body[start:].lower())
    if keep_hashtag_mark and segments:
        segments[0] = "#" + segments[0]
    return segments


def _byte_offsets(text: str) -> list[int]:
    offs = [0] * (len(text) + 1)
    pos = 0
    for i, ch in enumerate(text):
        offs[i] = pos
        pos += len(ch.encode("utf-8"))
    offs[len(text)] = pos
    return offs


def _is_word_char(ch: str) -> bool:
    return ch.isalnum()


def tokenize(text: str, keep_hashtag_mark: bool = False) -> list[Token]:
    """Whitespace tokenization with hashtag expansion and edge punctuation split.

    Punctuation is peeled one character at a time from chunk edges; a chunk
    whose core starts with '#' followed by at least one alphanumeric char is
    expanded through :func:`segment_hashtag`, all segments sharing the
    hashtag's byte span. Expects already-cleaned text.
    """
    offs = _byte_offsets(text)
    tokens: list[Token] = []
    for m in _CHUNK_RE.finditer(text):
        chunk = m.group(0)
        base = m.start()
        lo, hi = 0, len(chunk)
        # leading punctuation, but keep '#' heading a real hashtag
        while lo < hi and not _is_word_char(chunk[lo]):
            if chunk[lo] == "#" and any(_is_word_char(c) for c in chunk[lo + 1 : hi]):
                break
            tokens.append(Token(chunk[lo], offs[base + lo], offs[base + lo + 1]))
            lo += 1
        trailing: list[Token] = []
        while hi > lo and not _is_word_char(chunk[hi - 1]):
            if chunk[lo] == "#" and hi - 1 == lo:
                break
            trailing.append(Token(chunk[hi - 1], offs[base + hi - 1], offs[base + hi]))
            hi -= 1
        core = chunk[lo:hi]
        if core:
            span = (offs[base + lo], offs[base + hi])
            if core.startswith("#") and len(core) > 1:
                for seg in segment_hashtag(core, keep_hashtag_mark):
                    tokens.append(Token(seg, span[0], span[1]))
            else:
                tokens.append(Token(core, span[0], span[1]))
        tokens.extend(reversed(trailing))
    return tokens


# ---------------------------------------------------------------------------
# Porter stemmer (the 1980 algorithm, steps 1a through 5b)
# ---------------------------------------------------------------------------

_VOWELS = "aeiou"


def _cons(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _cons(word, i - 1)
    return True


def _measure(stem: str) -> int:
    # number of vowel-run -> consonant-run transitions: [C](VC)^m[V]
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        if _cons(stem, i):
            if prev_vowel:
                m += 1
            prev_vowel = False
        else:
            prev_vowel = True
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _cons(stem, i) for i in range(len(stem)))


def _double_cons(stem: str) -> bool:
    return len(stem) >= 2 and stem[-1] == stem[-2] and _cons(stem, len(stem) - 1)


def _ends_cvc(stem: str) -> bool:
    if len(stem) < 3:
        return False
    if not (_cons(stem, len(stem) - 3) and not _cons(stem, len(stem) - 2) and _cons(stem, len(stem) - 1)):
        return False
    return stem[-1] not in "wxy"


def _rule_step(word: str, rules: tuple[tuple[str, str], ...], min_measure: int) -> str:
    # longest matching suffix decides; if its measure condition fails the
    # whole step is a no-op (one rule per step)
    best = None
    for suffix, repl in rules:
        if word.endswith(suffix) and (best is None or len(suffix) > len(best[0])):
            best = (suffix, repl)
    if best is None:
        return word
    suffix, repl = best
    stem = word[: len(word) - len(suffix)]
    if _measure(stem) > min_measure:
        return stem + repl
    return word


_STEP2 = (
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
)

_STEP3 = (
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
)

_STEP4 = (
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
)


def stem(word: str) -> str:
    """Porter-stem a lowercase word ("cannabis" -> "cannabi")."""
    if len(word) <= 2:
        return word

    # step 1a
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif word.endswith("ss"):
        pass
    elif word.endswith("s"):
        word = word[:-1]

    # step 1b
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
    else:
        removed = False
        if word.endswith("ed") and _has_vowel(word[:-2]):
            word = word[:-2]
            removed = True
        elif word.endswith("ing") and _has_vowel(word[:-3]):
            word = word[:-3]
            removed = True
        if removed:
            if word.endswith(("at", "bl", "iz")):
                word += "e"
            elif _double_cons(word) and word[-1] not in "lsz":
                word = word[:-1]
            elif _measure(word) == 1 and _ends_cvc(word):
                word += "e"

    # step 1c
    if word.endswith("y") and _has_vowel(word[:-1]):
        word = word[:-1] + "i"

    word = _rule_step(word, _STEP2, 0)
    word = _rule_step(word, _STEP3, 0)

    # step 4
    best = None
    for suffix in _STEP4:
        if word.endswith(suffix) and (best is None or len(suffix) > len(best)):
            best = suffix
    if best is not None:
        stem_ = word[: len(word) - len(best)]
        if _measure(stem_) > 1 and (best != "ion" or stem_.endswith(("s", "t"))):
            word = stem_

    # step 5a
    if word.endswith("e"):
        stem_ = word[:-1]
        m = _measure(stem_)
        if m > 1 or (m == 1 and not _ends_cvc(stem_)):
            word = stem_

    # step 5b
    if _measure(word) > 1 and _double_cons(word) and word.endswith("l"):
        word = word[:-1]

    return word

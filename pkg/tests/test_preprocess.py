import string

import pytest
from hypothesis import given, strategies as st

from misinfo.errors import NotAHashtag
from misinfo.preprocess import CleanConfig, clean, segment_hashtag, stem, tokenize


class TestClean:
    def test_urls_mentions_emoji_removed(self):
        assert clean("Check https://t.co/abc @user cure \U0001F600") == "Check cure"

    def test_empty(self):
        assert clean("") == ""

    def test_identity_on_clean_input(self):
        assert clean("no noise here") == "no noise here"

    def test_ascii_smileys_survive(self):
        assert clean("fine :-) ok") == "fine :-) ok"

    def test_flags_disable_rules(self):
        cfg = CleanConfig(strip_urls=False, strip_mentions=False,
                          strip_emoticons=False)
        assert clean("keep @user https://x", cfg) == "keep @user https://x"

    def test_whitespace_collapsed_and_trimmed(self):
        assert clean("  a \t b\n\nc ") == "a b c"

    @given(st.text(max_size=200))
    def test_idempotent(self, text):
        once = clean(text)
        assert clean(once) == once


class TestSegmentHashtag:
    def test_camel_case(self):
        assert segment_hashtag("#BreastCancerAwareness") == ["breast", "cancer", "awareness"]

    def test_all_caps_run(self):
        assert segment_hashtag("#WHO") == ["who"]

    def test_no_boundary(self):
        assert segment_hashtag("#cancer") == ["cancer"]

    def test_uppercase_run_then_lowercase(self):
        assert segment_hashtag("#WHOSays") == ["who", "says"]

    def test_letter_digit_boundaries(self):
        assert segment_hashtag("#Covid19Vaccine") == ["covid", "19", "vaccine"]

    def test_keep_mark(self):
        assert segment_hashtag("#LungCancer", keep_hashtag_mark=True) == ["#lung", "cancer"]

    def test_rejects_non_hashtag(self):
        with pytest.raises(NotAHashtag):
            segment_hashtag("cancer")

    @given(st.text(alphabet=string.ascii_letters + string.digits,
                   min_size=1, max_size=30))
    def test_segments_concatenate_to_body(self, body):
        segments = segment_hashtag("#" + body)
        assert "".join(segments) == body.lower()


class TestTokenize:
    def test_punctuation_split(self):
        tokens = tokenize("meat causes cancer.")
        assert [(t.text, t.start, t.end) for t in tokens] == [
            ("meat", 0, 4), ("causes", 5, 11), ("cancer", 12, 18), (".", 18, 19)]

    def test_empty(self):
        assert tokenize("") == []

    def test_hashtag_expanded_sharing_span(self):
        tokens = tokenize("cure #LungCancer")
        assert [t.text for t in tokens] == ["cure", "lung", "cancer"]
        assert (tokens[1].start, tokens[1].end) == (5, 16)
        assert (tokens[2].start, tokens[2].end) == (5, 16)

    def test_leading_and_trailing_punctuation(self):
        tokens = tokenize('("hello!")')
        assert [t.text for t in tokens] == ["(", '"', "hello", "!", '"', ")"]

    def test_internal_apostrophe_kept(self):
        assert [t.text for t in tokenize("dog's urine")] == ["dog's", "urine"]

    def test_byte_offsets_for_non_ascii(self):
        text = "café cure"
        tokens = tokenize(text)
        data = text.encode("utf-8")
        assert data[tokens[1].start:tokens[1].end].decode() == "cure"

    @given(st.text(alphabet=string.ascii_letters + string.digits + " .,!?#'-",
                   max_size=80))
    def test_offsets_reconstruct_tokens(self, text):
        data = text.encode("utf-8")
        for tok in tokenize(text):
            window = data[tok.start:tok.end].decode("utf-8").lower()
            assert tok.text.lstrip("#").lower() in window


class TestPorterStemmer:
    @pytest.mark.parametrize("word,expected", [
        # values published with the algorithm definition
        ("caresses", "caress"), ("ponies", "poni"), ("ties", "ti"),
        ("caress", "caress"), ("cats", "cat"),
        ("feed", "feed"), ("agreed", "agre"), ("plastered", "plaster"),
        ("bled", "bled"), ("motoring", "motor"), ("sing", "sing"),
        ("conflated", "conflat"), ("troubled", "troubl"), ("sized", "size"),
        ("hopping", "hop"), ("tanned", "tan"), ("falling", "fall"),
        ("hissing", "hiss"), ("fizzed", "fizz"), ("failing", "fail"),
        ("filing", "file"), ("happy", "happi"), ("sky", "sky"),
        ("relational", "relat"), ("conditional", "condit"),
        ("rational", "ration"), ("generalizations", "gener"),
        ("oscillators", "oscil"), ("controlling", "control"),
        ("probably", "probabl"),
    ])
    def test_reference_vocabulary(self, word, expected):
        assert stem(word) == expected

    @pytest.mark.parametrize("word,expected", [
        ("cannabis", "cannabi"),
        ("juice", "juic"),
        ("urine", "urin"),
        ("nimbolide", "nimbolid"),
        ("herbal", "herbal"),
        ("meat", "meat"),
    ])
    def test_domain_keywords(self, word, expected):
        assert stem(word) == expected

    def test_short_words_unchanged(self):
        assert stem("as") == "as"
        assert stem("is") == "is"

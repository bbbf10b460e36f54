import math

from hypothesis import given, strategies as st

from ecpo.textnorm import (
    contains_phrase,
    content_tokens,
    dedup_preserve_order,
    jaccard,
    lexical_cosine,
    normalize_text,
    tokenize,
)

words = st.lists(st.sampled_from("alpha beta gamma delta rain fog lane".split()), max_size=8)


def test_normalize_collapses_whitespace_and_case():
    assert normalize_text("  Heavy\tRain \n ahead ") == "heavy rain ahead"


def test_tokenize_splits_on_non_alphanumerics():
    assert tokenize("Set speed to 80 km/h!") == ["set", "speed", "to", "80", "km", "h"]


def test_content_tokens_drop_stopwords():
    assert content_tokens("the rain on the road") == ["rain", "road"]


def test_dedup_preserves_first_occurrence():
    assert dedup_preserve_order(["b", "a", "b", "c", "a"]) == ["b", "a", "c"]


def test_jaccard_edges():
    assert jaccard(set(), set()) == 0.0
    assert jaccard({"a"}, set()) == 0.0
    assert jaccard({"a", "b"}, {"a", "b"}) == 1.0
    assert jaccard({"a", "b"}, {"b", "c"}) == 1 / 3


def test_cosine_edges():
    assert lexical_cosine([], ["a"]) == 0.0
    assert lexical_cosine(["a", "b"], ["c", "d"]) == 0.0
    assert math.isclose(lexical_cosine(["a", "b", "a"], ["a", "b", "a"]), 1.0, abs_tol=1e-12)


def test_cosine_known_value():
    # vectors (1,1) and (1,0): cos = 1/sqrt(2)
    assert math.isclose(lexical_cosine(["a", "b"], ["a"]), 1 / math.sqrt(2), rel_tol=1e-12)


def test_contains_phrase_requires_contiguous_match():
    haystack = tokenize("dense traffic builds up ahead")
    assert contains_phrase(haystack, tokenize("dense traffic"))
    assert contains_phrase(haystack, tokenize("traffic builds up"))
    assert not contains_phrase(haystack, tokenize("dense ahead"))
    assert not contains_phrase(haystack, [])


@given(words, words)
def test_cosine_symmetric_and_bounded(a, b):
    value = lexical_cosine(a, b)
    assert 0.0 <= value <= 1.0 + 1e-12
    assert math.isclose(value, lexical_cosine(b, a), abs_tol=1e-12)


@given(words, words)
def test_jaccard_symmetric_and_bounded(a, b):
    value = jaccard(set(a), set(b))
    assert 0.0 <= value <= 1.0
    assert value == jaccard(set(b), set(a))


@given(st.text())
def test_tokenize_stable_under_normalization(text):
    assert tokenize(normalize_text(text)) == tokenize(text)

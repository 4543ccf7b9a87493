import string

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qadapt.corpus import Corpus
from qadapt.errors import DataError
from qadapt.metrics import evaluate, exact_match, normalize_answer, token_f1

from conftest import make_pair


class TestNormalizeAnswer:
    def test_lowercase_punct_articles(self):
        assert normalize_answer("The Red Car!") == ["red", "car"]

    def test_empty(self):
        assert normalize_answer("") == []

    def test_article_and_whitespace_collapse(self):
        assert normalize_answer("an  apple") == ["apple"]

    def test_only_articles(self):
        assert normalize_answer("the a an") == []

    def test_unicode_punctuation(self):
        assert normalize_answer("¿dónde? — here") == ["dónde", "here"]

    def test_idempotent(self):
        for text in ("The Red Car!", "a, b, c", "", "don't stop"):
            once = normalize_answer(text)
            assert normalize_answer(" ".join(once)) == once


class TestTokenF1:
    def test_identical(self):
        assert token_f1("red car", "red car") == 1.0

    def test_disjoint(self):
        assert token_f1("red car", "blue door") == 0.0

    def test_partial_overlap(self):
        # pred [red, car], gold [red, car, door]: P=1, R=2/3
        assert token_f1("the red car", "red car door") == pytest.approx(0.8, abs=1e-12)

    def test_both_empty(self):
        assert token_f1("", "") == 1.0
        assert token_f1("the", "an") == 1.0

    def test_one_empty(self):
        assert token_f1("", "car") == 0.0
        assert token_f1("car", "the") == 0.0

    def test_multiset_overlap(self):
        # pred [dog, dog], gold [dog]: overlap 1, P=1/2, R=1
        assert token_f1("dog dog", "dog") == pytest.approx(2 / 3, abs=1e-12)

    @given(st.text(), st.text())
    def test_symmetry_and_bounds(self, a, b):
        f_ab = token_f1(a, b)
        assert 0.0 <= f_ab <= 1.0
        assert f_ab == pytest.approx(token_f1(b, a), abs=1e-12)

    @given(st.text())
    def test_self_score_is_one(self, a):
        assert token_f1(a, a) == 1.0

    @given(st.lists(st.sampled_from(["red", "car", "door", "blue"]), min_size=1, max_size=6))
    def test_invariance_under_noise(self, tokens):
        clean = " ".join(tokens)
        noisy = "The " + " ".join(t.upper() + "," for t in tokens)
        assert token_f1(noisy, clean) == pytest.approx(1.0, abs=1e-12)
        assert exact_match(noisy, clean) == 1


class TestExactMatch:
    def test_article_insensitive(self):
        assert exact_match("The cat", "cat") == 1

    def test_different_tokens(self):
        assert exact_match("cat", "cats") == 0

    def test_empty_identity(self):
        assert exact_match("", "") == 1


class TestEvaluate:
    def test_all_correct(self, tiny_corpus):
        preds = {p.id: p.answer_text for p in tiny_corpus}
        result = evaluate(preds, tiny_corpus)
        assert result.f1 == 1.0
        assert result.exact_match == 1.0
        assert result.n_evaluated == len(tiny_corpus)

    def test_mean_of_two(self):
        pairs = (
            make_pair("a", "q one?", "xx yy zz", "xx"),
            make_pair("b", "q two?", "uu vv ww", "uu vv"),
        )
        corpus = Corpus("two", pairs)
        result = evaluate({"a": "xx", "b": "uu"}, corpus)
        # a scores 1.0; b scores P=1, R=1/2 -> 2/3
        assert result.f1 == pytest.approx((1.0 + 2 / 3) / 2, abs=1e-12)

    def test_max_over_references(self):
        pair = make_pair(
            "a", "which car?", "it was the red car door", "red car",
            extra=("the red car door",),
        )
        corpus = Corpus("one", (pair,))
        result = evaluate({"a": "red car"}, corpus)
        assert result.per_example[0][1] == 1.0

    def test_missing_ids_error(self, tiny_corpus):
        with pytest.raises(DataError, match="p1"):
            evaluate({"p0": "x", "p2": "x", "p3": "x"}, tiny_corpus)

    def test_extra_ids_warn(self, tiny_corpus):
        preds = {p.id: p.answer_text for p in tiny_corpus}
        preds["ghost"] = "boo"
        with pytest.warns(UserWarning, match="ignored"):
            result = evaluate(preds, tiny_corpus)
        assert result.n_evaluated == len(tiny_corpus)

    def test_aggregate_equals_mean(self, tiny_corpus):
        preds = {p.id: "bob likes" for p in tiny_corpus}
        result = evaluate(preds, tiny_corpus)
        mean_f1 = sum(e[1] for e in result.per_example) / len(result.per_example)
        assert abs(result.f1 - mean_f1) < 1e-12


def test_punctuation_superset_of_ascii():
    from qadapt.corpus import is_punct_char

    for ch in string.punctuation:
        if ch in "$+<=>^`|~":  # ASCII symbols outside Unicode P*
            continue
        assert is_punct_char(ch), ch

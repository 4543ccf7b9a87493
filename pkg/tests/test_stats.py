import math

import numpy as np
import pytest

from qadapt.corpus import Corpus
from qadapt.errors import DataError, DegenerateSampleError
from qadapt.stats import (
    LengthHistogram,
    answer_length_words,
    auto_bin_edges,
    bin_index,
    contrastive_prefixes,
    length_histogram,
    length_shares,
    prefix_distribution,
)

from conftest import make_pair


def brute_force_auto_edges(samples):
    """Independent implementation: max of the Sturges and FD bin counts."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    lo, hi = float(np.min(x)), float(np.max(x))
    sturges = int(np.ceil(np.log2(n))) + 1
    iqr = float(np.percentile(x, 75) - np.percentile(x, 25))
    fd_width = 2.0 * iqr * n ** (-1.0 / 3.0)
    candidates = [sturges]
    if fd_width > 0.0:
        candidates.append(int(np.ceil((hi - lo) / fd_width)))
    bins = max(candidates)
    return np.linspace(lo, hi, bins + 1)


class TestAnswerLengthWords:
    def test_multi_word(self):
        pair = make_pair("a", "how do I stop?", "you press the brake pedal firmly", "press the brake pedal")
        assert answer_length_words(pair) == 4

    def test_single_token(self):
        pair = make_pair("a", "when was it?", "it happened in 2015 exactly", "2015")
        assert answer_length_words(pair) == 1

    def test_21_words_is_long_band(self):
        words = " ".join(f"w{i}" for i in range(21))
        pair = make_pair("a", "what is it?", f"intro {words} outro", words)
        assert answer_length_words(pair) == 21
        corpus = Corpus("c", (pair,))
        assert length_shares(corpus)[">20"] == 1.0


class TestAutoBinEdges:
    def test_uniform_1_to_100(self):
        # Sturges: ceil(log2 100) + 1 = 8; FD width 2*49.5*100^(-1/3) ~ 21.3
        # gives 5 bins; 8 wins.
        edges = auto_bin_edges(np.arange(1, 101))
        assert len(edges) - 1 == 8
        np.testing.assert_allclose(edges, np.linspace(1, 100, 9))

    def test_two_samples(self):
        edges = auto_bin_edges([0.0, 1.0])
        assert len(edges) - 1 == 2
        np.testing.assert_allclose(edges, [0.0, 0.5, 1.0])

    def test_all_equal_raises(self):
        with pytest.raises(DegenerateSampleError, match="zero range"):
            auto_bin_edges([3.0, 3.0, 3.0])

    def test_single_sample_raises(self):
        with pytest.raises(DegenerateSampleError, match="n >= 2"):
            auto_bin_edges([1.0])

    def test_matches_brute_force_on_random_samples(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 3000))
            kind = int(rng.integers(3))
            if kind == 0:
                x = rng.normal(size=n) * float(rng.uniform(0.5, 20))
            elif kind == 1:
                x = rng.integers(1, 40, size=n).astype(float)
            else:
                x = rng.exponential(5.0, size=n)
            if np.ptp(x) == 0:
                continue
            mine = auto_bin_edges(x)
            ref = brute_force_auto_edges(x)
            assert mine.shape == ref.shape
            np.testing.assert_array_equal(mine, ref)

    def test_matches_numpy_auto(self, rng):
        # The rule replicates numpy's bins='auto' histogram estimation.
        for _ in range(50):
            x = rng.normal(size=int(rng.integers(10, 500)))
            np.testing.assert_allclose(
                auto_bin_edges(x), np.histogram_bin_edges(x, bins="auto"), rtol=1e-12
            )


class TestLengthHistogram:
    def test_hand_counted_bins(self, lengths_corpus):
        hist = length_histogram(lengths_corpus, edges=[0.5, 3.0, 5.5])
        assert hist.probabilities == (0.5, 0.5)
        assert hist.n_samples == 4

    def test_single_length_needs_supplied_edges(self):
        pair = make_pair("a", "what is it?", "aa bb cc", "bb")
        corpus = Corpus("c", (pair, make_pair("b", "what is that?", "dd ee ff", "ee")))
        hist = length_histogram(corpus, edges=[0.0, 2.0, 4.0])
        assert hist.probabilities == (1.0, 0.0)

    def test_probabilities_sum_to_one(self, lengths_corpus):
        hist = length_histogram(lengths_corpus)
        assert abs(sum(hist.probabilities) - 1.0) < 1e-9

    def test_out_of_range_clamps(self, lengths_corpus):
        # lengths are 1,1,5,5; edges cover only [2, 4] so everything clamps.
        hist = length_histogram(lengths_corpus, edges=[2.0, 3.0, 4.0])
        assert hist.probabilities == (0.5, 0.5)

    def test_empty_corpus_raises(self):
        with pytest.raises(DataError, match="empty"):
            length_histogram(Corpus("e", ()))

    def test_invalid_histogram_rejected(self):
        with pytest.raises(DataError, match="strictly increasing"):
            LengthHistogram(bin_edges=(0.0, 0.0, 1.0), probabilities=(0.5, 0.5), n_samples=2)


class TestBinIndex:
    def test_half_open_convention(self):
        edges = np.array([0.0, 1.0, 2.0])
        assert bin_index(edges, 0.0) == 0
        assert bin_index(edges, 1.0) == 1
        assert bin_index(edges, 2.0) == 1  # last edge belongs to last bin
        assert bin_index(edges, -5.0) == 0
        assert bin_index(edges, 99.0) == 1


class TestLengthShares:
    def test_hand_counts(self):
        def with_len(pid, n):
            words = " ".join(f"w{i}" for i in range(n))
            return make_pair(pid, "what is it?", f"pre {words} post", words)

        corpus = Corpus("c", tuple(with_len(f"p{n}", n) for n in (3, 4, 25, 30)))
        shares = length_shares(corpus)
        assert shares == {"<=5": 0.5, "6-20": 0.0, ">20": 0.5}

    def test_all_short(self):
        corpus = Corpus("c", (make_pair("a", "what is it?", "xx yy", "xx"),))
        assert length_shares(corpus)["<=5"] == 1.0

    def test_partition_sums_to_one(self, lengths_corpus):
        assert abs(sum(length_shares(lengths_corpus).values()) - 1.0) < 1e-12


class TestPrefixDistribution:
    def _corpus(self):
        return Corpus(
            "q",
            (
                make_pair("a", "How do I park?", "you park here", "here"),
                make_pair("b", "How do you stop?", "you stop there", "there"),
            ),
        )

    def test_bigrams(self):
        dist = prefix_distribution(self._corpus(), n_words=2)
        assert dist.entries == (("how do", 2, 1.0),)

    def test_unigrams(self):
        dist = prefix_distribution(self._corpus(), n_words=1)
        assert dist.entries == (("how", 2, 1.0),)

    def test_tie_breaks_lexicographically(self):
        corpus = Corpus(
            "t",
            (
                make_pair("a", "who is it?", "xx yy", "xx"),
                make_pair("b", "how is it?", "xx yy", "xx"),
            ),
        )
        dist = prefix_distribution(corpus, n_words=1)
        assert [e[0] for e in dist.entries] == ["how", "who"]

    def test_short_question_contributes_full_sequence(self):
        corpus = Corpus("s", (make_pair("a", "why?", "xx yy", "xx"),))
        dist = prefix_distribution(corpus, n_words=2)
        assert dist.entries == (("why", 1, 1.0),)


class TestContrastivePrefixes:
    def _dist(self, entries):
        from qadapt.stats import PrefixDistribution

        return PrefixDistribution(n_words=2, entries=tuple(entries))

    def test_hand_ranking(self):
        target = self._dist([("shared of", 7, 0.7), ("what should", 3, 0.3)])
        source = self._dist([("shared of", 7, 0.7), ("who was", 3, 0.3)])
        up, down = contrastive_prefixes(source, target, k=1)
        assert up[0][0] == "what should"
        assert up[0][3] == pytest.approx(0.3)
        assert down[0][0] == "who was"
        assert down[0][3] == pytest.approx(0.3)

    def test_identical_distributions_all_zero(self):
        dist = self._dist([("how do", 5, 0.5), ("what is", 5, 0.5)])
        up, down = contrastive_prefixes(dist, dist, k=5)
        assert all(row[3] == 0.0 for row in up + down)

    def test_k_larger_than_inventory(self):
        target = self._dist([("how do", 1, 1.0)])
        source = self._dist([("who was", 1, 1.0)])
        up, down = contrastive_prefixes(source, target, k=10)
        assert len(up) == len(down) == 2

    def test_disjoint_when_enough_positive_diffs(self):
        target = self._dist([("how do", 6, 0.6), ("what should", 4, 0.4)])
        source = self._dist([("who was", 5, 0.5), ("when did", 5, 0.5)])
        up, down = contrastive_prefixes(source, target, k=2)
        assert {r[0] for r in up}.isdisjoint({r[0] for r in down})

    def test_n_words_mismatch(self):
        from qadapt.stats import PrefixDistribution

        one = PrefixDistribution(n_words=1, entries=(("who", 1, 1.0),))
        two = self._dist([("who was", 1, 1.0)])
        with pytest.raises(DataError, match="mismatch"):
            contrastive_prefixes(one, two, k=1)


def test_shared_edges_assign_every_sample(rng):
    pooled = rng.integers(1, 30, size=200).astype(float)
    edges = auto_bin_edges(pooled)
    from qadapt.stats import bin_counts

    a, b = pooled[:120], pooled[120:]
    assert bin_counts(edges, a).sum() == len(a)
    assert bin_counts(edges, b).sum() == len(b)

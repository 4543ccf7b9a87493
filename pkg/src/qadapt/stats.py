"""Domain-divergence analysis: answer-length histograms and question prefixes.

Histogram binning replicates the numpy ``bins='auto'`` rule: the bin count
is the larger of the Sturges count, ceil(log2 n) + 1, and the
Freedman-Diaconis count implied by the width 2 * IQR * n**(-1/3), with
equal-width bins spanning [min, max].
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, QaPair, tokenize
from .errors import DataError, DegenerateSampleError

_SUM_TOL = 1e-9


def answer_length_words(pair: QaPair) -> int:
    """Answer length in words under the shared tokenization (clamped to >= 1)."""
    return max(1, len(tokenize(pair.answer_text)))


def corpus_answer_lengths(corpus: Corpus) -> np.ndarray:
    return np.array([answer_length_words(p) for p in corpus], dtype=float)


def auto_bin_edges(samples) -> np.ndarray:
    """Equal-width bin edges for max(Sturges, Freedman-Diaconis) bins."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2:
        raise DegenerateSampleError(f"degenerate sample: need n >= 2, got {n}")
    lo, hi = float(x.min()), float(x.max())
    span = hi - lo
    if span == 0.0:
        raise DegenerateSampleError("degenerate sample: zero range")
    sturges_bins = (n - 1).bit_length() + 1
    iqr = float(np.percentile(x, 75) - np.percentile(x, 25))
    fd_width = 2.0 * iqr * n ** (-1.0 / 3.0)
    if fd_width > 0.0:
        n_bins = max(sturges_bins, math.ceil(span / fd_width))
    else:
        n_bins = sturges_bins
    return np.linspace(lo, hi, n_bins + 1)


def bin_index(edges: np.ndarray, value: float) -> int:
    """Index of the half-open bin containing value; out-of-range clamps to the edge bins."""
    idx = int(np.searchsorted(edges, value, side="right")) - 1
    return min(max(idx, 0), len(edges) - 2)


def bin_counts(edges: np.ndarray, samples) -> np.ndarray:
    """Per-bin counts with out-of-range samples clamped into the edge bins."""
    x = np.asarray(samples, dtype=float)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(edges) - 2)
    return np.bincount(idx, minlength=len(edges) - 1).astype(float)


@dataclass(frozen=True)
class LengthHistogram:
    bin_edges: tuple[float, ...]
    probabilities: tuple[float, ...]
    n_samples: int

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        probs = np.asarray(self.probabilities, dtype=float)
        if len(edges) != len(probs) + 1:
            raise DataError("histogram needs len(bin_edges) == len(probabilities) + 1")
        if np.any(np.diff(edges) <= 0):
            raise DataError("bin edges must be strictly increasing")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > _SUM_TOL:
            raise DataError("probabilities must be non-negative and sum to 1")


def length_histogram(corpus: Corpus, edges=None) -> LengthHistogram:
    """Histogram of answer word-lengths; probability mass per bin is count / n."""
    if len(corpus) == 0:
        raise DataError("cannot histogram an empty corpus")
    lengths = corpus_answer_lengths(corpus)
    edges = auto_bin_edges(lengths) if edges is None else np.asarray(edges, dtype=float)
    counts = bin_counts(edges, lengths)
    return LengthHistogram(
        bin_edges=tuple(float(e) for e in edges),
        probabilities=tuple(float(c) for c in counts / lengths.size),
        n_samples=int(lengths.size),
    )


def length_shares(corpus: Corpus, bands: tuple[int, int] = (5, 20)) -> dict[str, float]:
    """Fractions of answers with length <= bands[0], in between, and > bands[1]."""
    if len(corpus) == 0:
        raise DataError("cannot compute length shares of an empty corpus")
    short_max, long_min = bands
    lengths = corpus_answer_lengths(corpus)
    n = lengths.size
    short = float(np.sum(lengths <= short_max)) / n
    long = float(np.sum(lengths > long_min)) / n
    mid = float(np.sum((lengths > short_max) & (lengths <= long_min))) / n
    return {
        f"<={short_max}": short,
        f"{short_max + 1}-{long_min}": mid,
        f">{long_min}": long,
    }


@dataclass(frozen=True)
class PrefixDistribution:
    """Counts of initial question phrases, sorted by count desc then phrase."""

    n_words: int
    entries: tuple[tuple[str, int, float], ...]

    def __post_init__(self):
        if self.n_words not in (1, 2):
            raise DataError("n_words must be 1 or 2")
        if self.entries:
            total = sum(e[2] for e in self.entries)
            if abs(total - 1.0) > _SUM_TOL:
                raise DataError("prefix fractions must sum to 1")

    def fractions(self) -> dict[str, float]:
        return {phrase: frac for phrase, _, frac in self.entries}


def prefix_distribution(corpus: Corpus, n_words: int = 2) -> PrefixDistribution:
    """Distribution of the first ``n_words`` question tokens across a corpus."""
    if len(corpus) == 0:
        raise DataError("cannot compute prefixes of an empty corpus")
    counts = Counter(" ".join(tokenize(p.question)[:n_words]) for p in corpus)
    n = len(corpus)
    entries = tuple(
        (phrase, count, count / n)
        for phrase, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    )
    return PrefixDistribution(n_words=n_words, entries=entries)


def contrastive_prefixes(
    source: PrefixDistribution, target: PrefixDistribution, k: int
):
    """Top-k phrases overrepresented in target vs source, and vice versa.

    Ranking key is the fraction difference; phrases absent from one side
    count as fraction 0; ties break lexicographically. Returns two lists of
    (phrase, source_fraction, target_fraction, difference) tuples, where
    difference is target minus source in the first list and source minus
    target in the second.
    """
    if source.n_words != target.n_words:
        raise DataError(
            f"prefix n_words mismatch: source {source.n_words}, target {target.n_words}"
        )
    sf = source.fractions()
    tf = target.fractions()
    phrases = sorted(set(sf) | set(tf))
    rows = [(ph, sf.get(ph, 0.0), tf.get(ph, 0.0)) for ph in phrases]
    up = sorted(rows, key=lambda r: (-(r[2] - r[1]), r[0]))[:k]
    down = sorted(rows, key=lambda r: (-(r[1] - r[2]), r[0]))[:k]
    target_heavy = [(ph, s, t, t - s) for ph, s, t in up]
    source_heavy = [(ph, s, t, s - t) for ph, s, t in down]
    return target_heavy, source_heavy


# ---------------------------------------------------------------------------
# CSV reports used by the `stats` and `weights` CLI subcommands
# ---------------------------------------------------------------------------


def write_histogram_csv(hist: LengthHistogram, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "probability"])
        for i, p in enumerate(hist.probabilities):
            writer.writerow([hist.bin_edges[i], hist.bin_edges[i + 1], p])


def write_prefixes_csv(dist: PrefixDistribution, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phrase", "count", "fraction"])
        for phrase, count, fraction in dist.entries:
            writer.writerow([phrase, count, fraction])

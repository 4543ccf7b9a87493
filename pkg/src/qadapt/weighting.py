"""Importance weighting of source training samples by answer length.

Source and target answer-length densities are estimated as histogram mass
over one shared set of bin edges (computed from the pooled sample with the
auto rule), and the per-bin weight is the capped ratio target / source.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import DataError, SpecError
from .stats import answer_length_words, auto_bin_edges, bin_counts, bin_index

_SUM_TOL = 1e-9
DEFAULT_CAP = 10.0


@dataclass(frozen=True)
class DensityHistogram:
    """Probability mass per bin over shared edges."""

    bin_edges: tuple[float, ...]
    p: tuple[float, ...]

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        mass = np.asarray(self.p, dtype=float)
        if len(edges) != len(mass) + 1:
            raise DataError("density histogram needs len(bin_edges) == len(p) + 1")
        if np.any(mass < 0) or abs(mass.sum() - 1.0) > _SUM_TOL:
            raise DataError("density mass must be non-negative and sum to 1")


@dataclass(frozen=True)
class WeightTable:
    """Per-bin training weights in [0, cap]."""

    bin_edges: tuple[float, ...]
    weights: tuple[float, ...]
    cap: float = DEFAULT_CAP

    def __post_init__(self):
        if len(self.bin_edges) != len(self.weights) + 1:
            raise DataError("weight table needs len(bin_edges) == len(weights) + 1")
        if any(w < 0 or w > self.cap for w in self.weights):
            raise DataError(f"weights must lie in [0, {self.cap}]")

    def weight_for_length(self, length: float) -> float:
        return self.weights[bin_index(np.asarray(self.bin_edges), length)]


def shared_density_pair(source_lengths, target_lengths):
    """Estimate (p_source, p_target) over edges computed from the pooled sample."""
    src = np.asarray(source_lengths, dtype=float)
    tgt = np.asarray(target_lengths, dtype=float)
    if src.size < 2 or tgt.size < 2:
        raise DataError("both samples need n >= 2 for density estimation")
    edges = auto_bin_edges(np.concatenate([src, tgt]))
    p_s = bin_counts(edges, src) / src.size
    p_t = bin_counts(edges, tgt) / tgt.size
    edges_t = tuple(float(e) for e in edges)
    return (
        DensityHistogram(bin_edges=edges_t, p=tuple(float(v) for v in p_s)),
        DensityHistogram(bin_edges=edges_t, p=tuple(float(v) for v in p_t)),
    )


def weight_table(p_s: DensityHistogram, p_t: DensityHistogram, cap: float = DEFAULT_CAP) -> WeightTable:
    """Capped ratio p_target / p_source per bin.

    Bins unobserved in the source but observed in the target get the cap;
    bins unobserved everywhere get weight 1.
    """
    if cap <= 0:
        raise SpecError(f"cap must be positive, got {cap}")
    if p_s.bin_edges != p_t.bin_edges:
        raise DataError("source and target densities must share bin edges")
    weights = []
    for s, t in zip(p_s.p, p_t.p):
        if s > 0.0:
            weights.append(min(cap, t / s))
        elif t > 0.0:
            weights.append(cap)
        else:
            weights.append(1.0)
    return WeightTable(bin_edges=p_s.bin_edges, weights=tuple(weights), cap=float(cap))


def weigh_corpus(source: Corpus, table: WeightTable) -> np.ndarray:
    """Per-pair weights aligned with corpus order (answer lengths clamp into edge bins)."""
    return np.array(
        [table.weight_for_length(answer_length_words(p)) for p in source], dtype=float
    )


def weights_from_corpora(
    source: Corpus, target: Corpus, cap: float = DEFAULT_CAP
):
    """End-to-end table estimation: (p_s, p_t, table) from two corpora."""
    src_lengths = [answer_length_words(p) for p in source]
    tgt_lengths = [answer_length_words(p) for p in target]
    p_s, p_t = shared_density_pair(src_lengths, tgt_lengths)
    return p_s, p_t, weight_table(p_s, p_t, cap=cap)


def save_weight_table_csv(p_s: DensityHistogram, p_t: DensityHistogram, table: WeightTable, path) -> None:
    """Write bin_lo,bin_hi,p_source,p_target,weight rows (plottable as the weighting function)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "p_source", "p_target", "weight"])
        for i, w in enumerate(table.weights):
            writer.writerow(
                [table.bin_edges[i], table.bin_edges[i + 1], p_s.p[i], p_t.p[i], w]
            )


def load_weight_table_csv(path, cap: float | None = None) -> WeightTable:
    """Read a weight table written by save_weight_table_csv."""
    edges: list[float] = []
    weights: list[float] = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"bin_lo", "bin_hi", "weight"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise DataError(f"{path}: expected columns bin_lo,bin_hi,weight")
            for row in reader:
                lo, hi, w = float(row["bin_lo"]), float(row["bin_hi"]), float(row["weight"])
                if not edges:
                    edges.append(lo)
                elif abs(edges[-1] - lo) > 1e-12:
                    raise DataError(f"{path}: bins are not contiguous at {lo}")
                edges.append(hi)
                weights.append(w)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not weights:
        raise DataError(f"{path}: empty weight table")
    if cap is None:
        cap = max(DEFAULT_CAP, max(weights))
    return WeightTable(bin_edges=tuple(edges), weights=tuple(weights), cap=float(cap))

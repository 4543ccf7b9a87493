"""SQuAD-style answer evaluation: normalization, token F1, exact match.

Normalization follows the official evaluator semantics: lowercase, strip
punctuation characters, drop the articles "a", "an", "the", split on
whitespace. The punctuation set is the Unicode P* categories, a
deterministic superset of the ASCII set the official script uses.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass

from .corpus import Corpus, is_punct_char
from .errors import DataError

_ARTICLES = frozenset(("a", "an", "the"))


def normalize_answer(text: str) -> list[str]:
    """Normalize an answer string into the token list scores are computed on."""
    stripped = "".join(ch for ch in text.lower() if not is_punct_char(ch))
    return [tok for tok in stripped.split() if tok not in _ARTICLES]


def token_f1(prediction: str, gold: str) -> float:
    """Token-level F1 between two answer strings.

    Both empty after normalization scores 1.0; exactly one empty scores 0.0.
    """
    pred_tokens = normalize_answer(prediction)
    gold_tokens = normalize_answer(gold)
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def exact_match(prediction: str, gold: str) -> int:
    """1 iff the normalized token lists are equal."""
    return int(normalize_answer(prediction) == normalize_answer(gold))


@dataclass(frozen=True)
class EvalResult:
    f1: float
    exact_match: float
    n_evaluated: int
    per_example: tuple[tuple[str, float, float], ...]

    def to_json_dict(self) -> dict:
        return {
            "f1": self.f1,
            "exact_match": self.exact_match,
            "n_evaluated": self.n_evaluated,
            "per_example": [list(e) for e in self.per_example],
        }


def evaluate(predictions: dict, corpus: Corpus) -> EvalResult:
    """Score a predictions map (id -> answer string) against a corpus.

    Per-example scores take the max over the gold answer and any auxiliary
    references; aggregates are unweighted means. Ids missing from
    ``predictions`` raise; extra ids draw a warning and are ignored.
    """
    missing = [p.id for p in corpus if p.id not in predictions]
    if missing:
        raise DataError(
            f"predictions missing {len(missing)} id(s): " + ", ".join(missing[:20])
        )
    extra = set(predictions) - set(corpus.ids())
    if extra:
        warnings.warn(f"{len(extra)} prediction id(s) not in corpus; ignored", stacklevel=2)

    per_example = []
    for pair in corpus:
        pred = predictions[pair.id]
        f1 = max(token_f1(pred, ref) for ref in pair.all_answers)
        em = max(exact_match(pred, ref) for ref in pair.all_answers)
        per_example.append((pair.id, float(f1), float(em)))
    n = len(per_example)
    mean_f1 = sum(e[1] for e in per_example) / n if n else 0.0
    mean_em = sum(e[2] for e in per_example) / n if n else 0.0
    return EvalResult(
        f1=mean_f1, exact_match=mean_em, n_evaluated=n, per_example=tuple(per_example)
    )

"""Input validation helpers shared by the estimator API and the CLI."""

from __future__ import annotations

import numpy as np

from .corpus import Corpus
from .errors import DataError


def check_corpus(obj, allow_empty: bool = False) -> Corpus:
    if not isinstance(obj, Corpus):
        raise TypeError(f"expected a Corpus, got {type(obj).__name__}")
    if not allow_empty and len(obj) == 0:
        raise DataError("corpus is empty")
    return obj


def check_sample_weight(weights, n: int) -> np.ndarray | None:
    if weights is None:
        return None
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.shape[0] != n:
        raise DataError(f"sample_weight must be 1-d of length {n}, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DataError("sample_weight must be finite and non-negative")
    return w


def check_is_fitted(estimator, attribute: str) -> None:
    from sklearn.exceptions import NotFittedError

    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )

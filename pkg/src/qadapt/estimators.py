"""Scikit-learn style estimators wrapping the span model and the weighter.

These facades make the workbench compose with the wider ecosystem
(``get_params``/``set_params``, ``clone``, pipeline-style reweighting)
while the functional modules stay the source of truth. X is a Corpus
rather than a feature matrix, as is common for text estimators.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import Corpus
from .encoding import build_vocab
from .metrics import evaluate
from .qamodel import ModelConfig, init_model, predict_answers
from .trainer import TrainConfig, train
from .validation import check_corpus, check_is_fitted, check_sample_weight
from .weighting import weigh_corpus, weights_from_corpora


class SpanQaEstimator(BaseEstimator):
    """Extractive span QA model with a fit/predict interface.

    Parameters mirror the model and trainer configuration. With
    ``warm_start=True`` a second ``fit`` continues from the current
    parameters (transfer-learning fine-tuning); otherwise ``fit``
    reinitializes from the corpus vocabulary.

    Attributes
    ----------
    model_ : QaModel
        The trained model.
    train_log_ : TrainLog
        Per-epoch losses and counters from the last fit.
    """

    def __init__(
        self,
        d_model: int = 64,
        n_layers: int = 2,
        n_heads: int = 2,
        ffn_dim: int = 128,
        max_seq_len: int = 128,
        max_answer_len: int = 30,
        init_scale: float = 0.05,
        epochs: int = 2,
        batch_size: int = 32,
        learning_rate: float = 0.05,
        optimizer: str = "sgd",
        momentum: float = 0.9,
        shuffle: bool = True,
        gradient_clip: float | None = None,
        warm_start: bool = False,
        seed: int = 0,
    ):
        self.d_model = d_model
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.ffn_dim = ffn_dim
        self.max_seq_len = max_seq_len
        self.max_answer_len = max_answer_len
        self.init_scale = init_scale
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.momentum = momentum
        self.shuffle = shuffle
        self.gradient_clip = gradient_clip
        self.warm_start = warm_start
        self.seed = seed
        self.model_ = None
        self.train_log_ = None

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            optimizer=self.optimizer,
            momentum=self.momentum,
            seed=self.seed,
            shuffle=self.shuffle,
            gradient_clip=self.gradient_clip,
        )

    def fit(self, X: Corpus, y=None, sample_weight=None):
        """Train on a corpus; gold answers live inside the corpus, so y is unused."""
        corpus = check_corpus(X)
        weights = check_sample_weight(sample_weight, len(corpus))
        if self.warm_start and self.model_ is not None:
            start = self.model_
        else:
            config = ModelConfig(
                vocab=build_vocab(corpus),
                d_model=self.d_model,
                n_layers=self.n_layers,
                n_heads=self.n_heads,
                ffn_dim=self.ffn_dim,
                max_seq_len=self.max_seq_len,
                max_answer_len=self.max_answer_len,
                init_scale=self.init_scale,
                seed=self.seed,
            )
            start = init_model(config)
        self.model_, self.train_log_ = train(start, corpus, self._train_config(), weights)
        return self

    def predict(self, X: Corpus) -> dict[str, str]:
        """Answer strings keyed by pair id."""
        check_is_fitted(self, "model_")
        return predict_answers(self.model_, check_corpus(X))

    def score(self, X: Corpus, y=None) -> float:
        """Mean token F1 against the corpus gold answers."""
        check_is_fitted(self, "model_")
        corpus = check_corpus(X)
        return evaluate(self.predict(corpus), corpus).f1


class AnswerLengthWeighter(BaseEstimator, TransformerMixin):
    """Importance weights from source/target answer-length histograms.

    ``fit(source_corpus, target_corpus)`` estimates both densities over
    shared bins; ``transform(corpus)`` returns one capped weight per pair.

    Attributes
    ----------
    source_density_, target_density_ : DensityHistogram
    table_ : WeightTable
    """

    def __init__(self, cap: float = 10.0):
        self.cap = cap
        self.table_ = None
        self.source_density_ = None
        self.target_density_ = None

    def fit(self, X: Corpus, y: Corpus = None):
        """X is the source corpus, y the target corpus the weights should match."""
        source = check_corpus(X)
        target = check_corpus(y)
        self.source_density_, self.target_density_, self.table_ = weights_from_corpora(
            source, target, cap=self.cap
        )
        return self

    def transform(self, X: Corpus) -> np.ndarray:
        check_is_fitted(self, "table_")
        return weigh_corpus(check_corpus(X), self.table_)

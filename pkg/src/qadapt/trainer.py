"""Weighted SGD training, transfer-learning fine-tuning, subset sampling.

Sample weights scale each example's gradient contribution inside the batch
mean, which under plain SGD is exactly a per-sample learning-rate factor.
All runs are bit-deterministic given their seeds.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import asdict, dataclass

import numpy as np

from .corpus import Corpus
from .encoding import encode_corpus
from .errors import DataError, SpecError, TrainingError
from .qamodel import QaModel, backward

_OPTIMIZERS = ("sgd", "sgd_momentum")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2
    batch_size: int = 32
    learning_rate: float = 0.05
    optimizer: str = "sgd"
    momentum: float = 0.9
    weight_mode: str = "grad_scale"
    seed: int = 0
    shuffle: bool = True
    gradient_clip: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise SpecError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise SpecError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise SpecError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in _OPTIMIZERS:
            raise SpecError(f"optimizer must be one of {_OPTIMIZERS}, got {self.optimizer!r}")
        if self.weight_mode != "grad_scale":
            raise SpecError(f"unknown weight_mode {self.weight_mode!r}")
        if self.gradient_clip is not None and self.gradient_clip <= 0:
            raise SpecError("gradient_clip must be positive when set")

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown TrainConfig field(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainLog:
    epoch_mean_loss: list[float]
    examples_seen: int
    n_unusable: int
    wall_time_s: float

    def to_json_dict(self) -> dict:
        return asdict(self)


def _epoch_order(seed: int, epoch: int, n: int, shuffle: bool) -> np.ndarray:
    if not shuffle:
        return np.arange(n)
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, epoch]).permutation(n)


def _clip_gradients(grads: dict, max_norm: float) -> None:
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for k in grads:
            grads[k] = grads[k] * scale


def train(
    model: QaModel,
    corpus: Corpus,
    config: TrainConfig,
    weights=None,
):
    """Train a copy of ``model`` on ``corpus``; returns (trained model, log).

    ``weights``, when given, align 1:1 with corpus order and must be
    non-negative; omitting them is identical to passing all ones.
    """
    if len(corpus) == 0:
        raise TrainingError("training corpus is empty")
    w = np.ones(len(corpus)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(corpus),):
        raise TrainingError(
            f"weights length {w.shape} does not match corpus size {len(corpus)}"
        )
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise TrainingError("weights must be finite and non-negative")

    t0 = time.monotonic()
    encoded = encode_corpus(corpus, model.config)
    usable = [i for i, ex in enumerate(encoded) if ex.usable]
    n_unusable = len(encoded) - len(usable)
    if not usable:
        raise TrainingError("no usable examples after encoding (all gold spans truncated)")

    out = model.copy()
    velocity = None
    if config.optimizer == "sgd_momentum":
        velocity = {k: np.zeros_like(v) for k, v in out.params.items()}

    epoch_losses = []
    examples_seen = 0
    step = 0
    for epoch in range(config.epochs):
        order = _epoch_order(config.seed, epoch, len(usable), config.shuffle)
        batch_losses = []
        for lo in range(0, len(usable), config.batch_size):
            idx = [usable[j] for j in order[lo : lo + config.batch_size]]
            batch = [encoded[i] for i in idx]
            loss, grads = backward(out, batch, w[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at step {step} (epoch {epoch})")
            if config.gradient_clip is not None:
                _clip_gradients(grads, config.gradient_clip)
            if velocity is None:
                for k, g in grads.items():
                    out.params[k] -= config.learning_rate * g
            else:
                for k, g in grads.items():
                    velocity[k] = config.momentum * velocity[k] + g
                    out.params[k] -= config.learning_rate * velocity[k]
            batch_losses.append(loss)
            examples_seen += len(batch)
            step += 1
        epoch_losses.append(float(np.mean(batch_losses)))
    log = TrainLog(
        epoch_mean_loss=epoch_losses,
        examples_seen=examples_seen,
        n_unusable=n_unusable,
        wall_time_s=time.monotonic() - t0,
    )
    return out, log


def finetune(base: QaModel, target_sample: Corpus, config: TrainConfig):
    """Continue training from base parameters on a target-domain sample."""
    if len(target_sample) == 0:
        raise TrainingError("fine-tuning sample is empty")
    return train(base, target_sample, config)


# ---------------------------------------------------------------------------
# Subset sampling protocol: several fractions, several independent draws each
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubsetPlan:
    fractions: tuple[float, ...]
    n_draws: int
    master_seed: int

    def __post_init__(self):
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        if not self.fractions:
            raise SpecError("plan needs at least one fraction")
        for f in self.fractions:
            if not (0 < f <= 100):
                raise SpecError(f"fraction {f} outside (0, 100]")
        if self.n_draws < 1:
            raise SpecError("n_draws must be >= 1")
        if self.master_seed < 0:
            raise SpecError("master_seed must be non-negative")

    def to_json_dict(self) -> dict:
        return {
            "fractions": list(self.fractions),
            "n_draws": self.n_draws,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SubsetPlan":
        return cls(
            fractions=tuple(d["fractions"]),
            n_draws=int(d["n_draws"]),
            master_seed=int(d["master_seed"]),
        )


def _fraction_entropy(fraction: float) -> int:
    return int.from_bytes(struct.pack("<d", float(fraction)), "little")


def subset_seed(master_seed: int, fraction: float, draw: int) -> list[int]:
    return [master_seed, _fraction_entropy(fraction), draw]


def sample_subsets(corpus: Corpus, plan: SubsetPlan) -> dict[float, list[Corpus]]:
    """Per fraction, ``n_draws`` independent without-replacement subsets.

    Subset size is floor(fraction/100 * n); each (fraction, draw) uses its
    own deterministic sub-seed, and subsets keep the original corpus order.
    """
    n = len(corpus)
    out: dict[float, list[Corpus]] = {}
    for fraction in plan.fractions:
        size = int(np.floor(fraction / 100.0 * n))
        if size < 1:
            raise DataError(f"fraction {fraction}% of {n} pairs yields an empty subset")
        draws = []
        for draw in range(plan.n_draws):
            rng = np.random.default_rng(subset_seed(plan.master_seed, fraction, draw))
            idx = np.sort(rng.choice(n, size=size, replace=False))
            draws.append(corpus.subset(idx.tolist(), name=f"{corpus.name}@{fraction}%d{draw}"))
        out[fraction] = draws
    return out


def save_train_log(log: TrainLog, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(log.to_json_dict(), fh, indent=2)
        fh.write("\n")

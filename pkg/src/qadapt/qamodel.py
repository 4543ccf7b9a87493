"""Desk-scale extractive QA model: embeddings, transformer encoder, span head.

Pure numpy, float64, with exact analytic gradients (verified against
central finite differences in the test suite). Pre-layer-norm blocks with
GELU feed-forward; learned position embeddings; a linear head produces a
start logit and an end logit per position. Non-context positions are
masked to -inf before any softmax.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import erf

from .corpus import Corpus
from .encoding import (
    CLS,
    PAD,
    SEP,
    SPECIAL_TOKENS,
    UNK,
    EncodedExample,
    decode_answer,
    encode_corpus,
)
from .errors import DataError, SpecError

_LN_EPS = 1e-5
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ModelConfig:
    vocab: dict[str, int]
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 2
    ffn_dim: int = 128
    max_seq_len: int = 128
    max_answer_len: int = 30
    init_scale: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise SpecError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if self.max_seq_len < 8:
            raise SpecError(f"max_seq_len must be >= 8, got {self.max_seq_len}")
        if self.max_answer_len < 1:
            raise SpecError("max_answer_len must be >= 1")
        for tok in SPECIAL_TOKENS:
            if tok not in self.vocab:
                raise SpecError(f"vocab is missing special token {tok}")

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def to_json_dict(self) -> dict:
        return {
            "vocab": self.vocab,
            "d_model": self.d_model,
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "ffn_dim": self.ffn_dim,
            "max_seq_len": self.max_seq_len,
            "max_answer_len": self.max_answer_len,
            "init_scale": self.init_scale,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            vocab={str(k): int(v) for k, v in d["vocab"].items()},
            d_model=int(d["d_model"]),
            n_layers=int(d["n_layers"]),
            n_heads=int(d["n_heads"]),
            ffn_dim=int(d["ffn_dim"]),
            max_seq_len=int(d["max_seq_len"]),
            max_answer_len=int(d["max_answer_len"]),
            init_scale=float(d["init_scale"]),
            seed=int(d["seed"]),
        )


@dataclass
class QaModel:
    config: ModelConfig
    params: dict[str, np.ndarray]
    rng_state: dict = field(default_factory=dict)

    def copy(self) -> "QaModel":
        return QaModel(
            config=self.config,
            params={k: v.copy() for k, v in self.params.items()},
            rng_state=json.loads(json.dumps(self.rng_state)),
        )


def init_model(config: ModelConfig) -> QaModel:
    """Seeded initialization: uniform(-init_scale, init_scale) weights and
    embeddings, ones/zeros for layer norms, zero biases."""
    rng = np.random.default_rng(config.seed)
    s = config.init_scale
    d, f = config.d_model, config.ffn_dim

    def u(*shape):
        return rng.uniform(-s, s, size=shape)

    p: dict[str, np.ndarray] = {
        "tok_emb": u(config.vocab_size, d),
        "pos_emb": u(config.max_seq_len, d),
    }
    for i in range(config.n_layers):
        pre = f"l{i}."
        p[pre + "ln1.g"] = np.ones(d)
        p[pre + "ln1.b"] = np.zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            p[pre + "attn." + name] = u(d, d)
        for name in ("bq", "bk", "bv", "bo"):
            p[pre + "attn." + name] = np.zeros(d)
        p[pre + "ln2.g"] = np.ones(d)
        p[pre + "ln2.b"] = np.zeros(d)
        p[pre + "ffn.w1"] = u(d, f)
        p[pre + "ffn.b1"] = np.zeros(f)
        p[pre + "ffn.w2"] = u(f, d)
        p[pre + "ffn.b2"] = np.zeros(d)
    p["ln_f.g"] = np.ones(d)
    p["ln_f.b"] = np.zeros(d)
    p["head.w"] = u(d, 2)
    p["head.b"] = np.zeros(2)
    return QaModel(config=config, params=p, rng_state=rng.bit_generator.state)


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------


def _gelu(x):
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def _gelu_grad(x):
    return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _layer_norm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + _LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv)


def _layer_norm_backward(dy, g, cache):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _split_heads(x, n_heads):
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def _stack_batch(examples: list[EncodedExample], config: ModelConfig):
    """Stack a batch, trimming the shared all-PAD tail for speed."""
    t = max(ex.n_real for ex in examples)
    ids = np.stack([ex.ids[:t] for ex in examples])
    key_mask = ids != config.vocab[PAD]
    ctx_mask = np.zeros(ids.shape, dtype=bool)
    for b, ex in enumerate(examples):
        lo, hi = ex.context_span
        ctx_mask[b, lo : hi + 1] = True
    return ids, key_mask, ctx_mask


def _forward_raw(params: dict, config: ModelConfig, ids, key_mask):
    b, t = ids.shape
    x = params["tok_emb"][ids] + params["pos_emb"][:t][None, :, :]
    inv_sqrt_dh = 1.0 / math.sqrt(config.d_model // config.n_heads)
    layer_caches = []
    for i in range(config.n_layers):
        pre = f"l{i}."
        h, ln1c = _layer_norm(x, params[pre + "ln1.g"], params[pre + "ln1.b"])
        q = _split_heads(h @ params[pre + "attn.wq"] + params[pre + "attn.bq"], config.n_heads)
        k = _split_heads(h @ params[pre + "attn.wk"] + params[pre + "attn.bk"], config.n_heads)
        v = _split_heads(h @ params[pre + "attn.wv"] + params[pre + "attn.bv"], config.n_heads)
        scores = np.matmul(q, k.transpose(0, 1, 3, 2)) * inv_sqrt_dh
        scores = np.where(key_mask[:, None, None, :], scores, -np.inf)
        scores -= scores.max(axis=-1, keepdims=True)
        probs = np.exp(scores)
        probs /= probs.sum(axis=-1, keepdims=True)
        o = _merge_heads(np.matmul(probs, v))
        ao = o @ params[pre + "attn.wo"] + params[pre + "attn.bo"]
        x_attn = x + ao
        h2, ln2c = _layer_norm(x_attn, params[pre + "ln2.g"], params[pre + "ln2.b"])
        u = h2 @ params[pre + "ffn.w1"] + params[pre + "ffn.b1"]
        a = _gelu(u)
        x = x_attn + a @ params[pre + "ffn.w2"] + params[pre + "ffn.b2"]
        layer_caches.append(
            {"h": h, "ln1c": ln1c, "q": q, "k": k, "v": v, "probs": probs, "o": o,
             "h2": h2, "ln2c": ln2c, "u": u, "a": a}
        )
    xf, lnfc = _layer_norm(x, params["ln_f.g"], params["ln_f.b"])
    logits = xf @ params["head.w"] + params["head.b"]
    cache = {"ids": ids, "layers": layer_caches, "xf": xf, "lnfc": lnfc,
             "inv_sqrt_dh": inv_sqrt_dh}
    return logits, cache


def forward(model: QaModel, examples: list[EncodedExample]):
    """Start and end logits, shape (batch, max_seq_len); non-context is -inf."""
    if not examples:
        raise DataError("empty batch")
    ids, key_mask, ctx_mask = _stack_batch(examples, model.config)
    logits, _ = _forward_raw(model.params, model.config, ids, key_mask)
    t = ids.shape[1]
    full = np.full((len(examples), model.config.max_seq_len, 2), -np.inf)
    full[:, :t, :] = np.where(ctx_mask[:, :, None], logits, -np.inf)
    return full[:, :, 0], full[:, :, 1]


def _masked_ce(logits, ctx_mask, gold):
    """Per-example cross entropy over context positions, plus softmax probs."""
    masked = np.where(ctx_mask, logits, -np.inf)
    m = masked.max(axis=1, keepdims=True)
    z = m + np.log(np.exp(masked - m).sum(axis=1, keepdims=True))
    probs = np.exp(masked - z)
    rows = np.arange(len(gold))
    losses = (z[:, 0] - masked[rows, gold])
    return losses, probs


def span_loss(start_logits, end_logits, examples: list[EncodedExample], weights=None) -> float:
    """Mean over the batch of half the summed start/end cross entropies."""
    b = len(examples)
    t = start_logits.shape[1]
    ctx = np.zeros((b, t), dtype=bool)
    gs = np.empty(b, dtype=int)
    ge = np.empty(b, dtype=int)
    for i, ex in enumerate(examples):
        if ex.gold_start is None or not ex.usable:
            raise DataError(f"pair {ex.pair_id!r}: no usable gold span")
        lo, hi = ex.context_span
        ctx[i, lo : hi + 1] = True
        gs[i], ge[i] = ex.gold_start, ex.gold_end
    w = np.ones(b) if weights is None else np.asarray(weights, dtype=float)
    ls, _ = _masked_ce(start_logits[:, :t], ctx, gs)
    le, _ = _masked_ce(end_logits[:, :t], ctx, ge)
    return float((w * 0.5 * (ls + le)).sum() / b)


def backward(model: QaModel, examples: list[EncodedExample], weights=None):
    """Weighted span loss and exact gradients for every parameter.

    Each example's gradient contribution is scaled by its weight inside the
    batch mean, so under plain SGD a weight acts as a per-sample learning
    rate factor.
    """
    config, params = model.config, model.params
    b = len(examples)
    ids, key_mask, ctx_mask = _stack_batch(examples, config)
    t = ids.shape[1]
    logits, cache = _forward_raw(params, config, ids, key_mask)

    gs = np.empty(b, dtype=int)
    ge = np.empty(b, dtype=int)
    for i, ex in enumerate(examples):
        if ex.gold_start is None or not ex.usable:
            raise DataError(f"pair {ex.pair_id!r}: no usable gold span")
        gs[i], ge[i] = ex.gold_start, ex.gold_end
    w = np.ones(b) if weights is None else np.asarray(weights, dtype=float)

    ls, ps = _masked_ce(logits[:, :, 0], ctx_mask, gs)
    le, pe = _masked_ce(logits[:, :, 1], ctx_mask, ge)
    loss = float((w * 0.5 * (ls + le)).sum() / b)

    coeff = (0.5 * w / b)[:, None]
    rows = np.arange(b)
    d_start = ps.copy()
    d_start[rows, gs] -= 1.0
    d_end = pe.copy()
    d_end[rows, ge] -= 1.0
    d_logits = np.stack([d_start * coeff, d_end * coeff], axis=-1)

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    xf = cache["xf"]
    grads["head.w"] = xf.reshape(-1, config.d_model).T @ d_logits.reshape(-1, 2)
    grads["head.b"] = d_logits.sum(axis=(0, 1))
    d_xf = d_logits @ params["head.w"].T
    dx, grads["ln_f.g"], grads["ln_f.b"] = _layer_norm_backward(
        d_xf, params["ln_f.g"], cache["lnfc"]
    )

    inv_sqrt_dh = cache["inv_sqrt_dh"]
    d = config.d_model
    for i in reversed(range(config.n_layers)):
        pre = f"l{i}."
        lc = cache["layers"][i]
        # feed-forward branch
        d_ff_out = dx
        grads[pre + "ffn.w2"] = lc["a"].reshape(-1, config.ffn_dim).T @ d_ff_out.reshape(-1, d)
        grads[pre + "ffn.b2"] = d_ff_out.sum(axis=(0, 1))
        d_a = d_ff_out @ params[pre + "ffn.w2"].T
        d_u = d_a * _gelu_grad(lc["u"])
        grads[pre + "ffn.w1"] = lc["h2"].reshape(-1, d).T @ d_u.reshape(-1, config.ffn_dim)
        grads[pre + "ffn.b1"] = d_u.sum(axis=(0, 1))
        d_h2 = d_u @ params[pre + "ffn.w1"].T
        d_x_attn, grads[pre + "ln2.g"], grads[pre + "ln2.b"] = _layer_norm_backward(
            d_h2, params[pre + "ln2.g"], lc["ln2c"]
        )
        d_x_attn = d_x_attn + dx  # residual
        # attention branch
        d_ao = d_x_attn
        grads[pre + "attn.wo"] = lc["o"].reshape(-1, d).T @ d_ao.reshape(-1, d)
        grads[pre + "attn.bo"] = d_ao.sum(axis=(0, 1))
        d_o = _split_heads(d_ao @ params[pre + "attn.wo"].T, config.n_heads)
        d_probs = np.matmul(d_o, lc["v"].transpose(0, 1, 3, 2))
        d_v = np.matmul(lc["probs"].transpose(0, 1, 3, 2), d_o)
        d_scores = lc["probs"] * (
            d_probs - (d_probs * lc["probs"]).sum(axis=-1, keepdims=True)
        )
        d_q = np.matmul(d_scores, lc["k"]) * inv_sqrt_dh
        d_k = np.matmul(d_scores.transpose(0, 1, 3, 2), lc["q"]) * inv_sqrt_dh
        d_h = np.zeros_like(lc["h"])
        for name, grad_heads in (("wq", d_q), ("wk", d_k), ("wv", d_v)):
            merged = _merge_heads(grad_heads)
            grads[pre + "attn." + name] = lc["h"].reshape(-1, d).T @ merged.reshape(-1, d)
            grads[pre + "attn.b" + name[1]] = merged.sum(axis=(0, 1))
            d_h += merged @ params[pre + "attn." + name].T
        d_x, grads[pre + "ln1.g"], grads[pre + "ln1.b"] = _layer_norm_backward(
            d_h, params[pre + "ln1.g"], lc["ln1c"]
        )
        dx = d_x + d_x_attn  # residual

    np.add.at(grads["tok_emb"], ids, dx)
    grads["pos_emb"][:t] = dx.sum(axis=0)
    return loss, grads


# ---------------------------------------------------------------------------
# Span decoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpanPrediction:
    start: int
    end: int
    score: float
    answer_text: str = ""


def predict_span(start_logits, end_logits, context_span, max_answer_len: int) -> SpanPrediction:
    """Best (start, end) with start <= end < start + max_answer_len inside the context.

    Ties break toward the smallest start, then the smallest end.
    """
    t = len(start_logits)
    lo, hi = context_span
    pair_scores = np.asarray(start_logits)[:, None] + np.asarray(end_logits)[None, :]
    valid = np.triu(np.ones((t, t), dtype=bool)) & ~np.triu(
        np.ones((t, t), dtype=bool), k=max_answer_len
    )
    valid[:lo, :] = False
    valid[hi + 1 :, :] = False
    valid[:, :lo] = False
    valid[:, hi + 1 :] = False
    with np.errstate(invalid="ignore"):
        pair_scores = np.where(valid, pair_scores, -np.inf)
    flat = int(np.argmax(pair_scores))
    best = pair_scores.flat[flat]
    if not np.isfinite(best):
        raise DataError("no valid span position (everything masked)")
    return SpanPrediction(start=flat // t, end=flat % t, score=float(best))


def predict_spans(
    model: QaModel,
    corpus: Corpus,
    batch_size: int = 64,
    max_answer_len: int | None = None,
) -> dict[str, SpanPrediction]:
    """Predicted spans (with decoded text) for every pair in the corpus."""
    max_len = model.config.max_answer_len if max_answer_len is None else max_answer_len
    encoded = encode_corpus(corpus, model.config)
    out: dict[str, SpanPrediction] = {}
    for i in range(0, len(encoded), batch_size):
        batch = encoded[i : i + batch_size]
        start, end = forward(model, batch)
        for j, ex in enumerate(batch):
            span = predict_span(start[j], end[j], ex.context_span, max_len)
            text = decode_answer(span, corpus[i + j], ex.word_index)
            out[ex.pair_id] = replace(span, answer_text=text)
    return out


def predict_answers(model: QaModel, corpus: Corpus, batch_size: int = 64) -> dict[str, str]:
    return {pid: sp.answer_text for pid, sp in predict_spans(model, corpus, batch_size).items()}


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(model: QaModel, path) -> None:
    """Single-file checkpoint: config JSON, RNG state, all parameter tensors."""
    arrays = {"p/" + k: v for k, v in model.params.items()}
    arrays["__config__"] = np.array(json.dumps(model.config.to_json_dict()))
    arrays["__rng_state__"] = np.array(json.dumps(model.rng_state))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> QaModel:
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            config = ModelConfig.from_json_dict(json.loads(str(data["__config__"])))
            rng_state = json.loads(str(data["__rng_state__"]))
            params = {k[2:]: data[k].copy() for k in data.files if k.startswith("p/")}
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: not a valid checkpoint: {exc}") from exc
    return QaModel(config=config, params=params, rng_state=rng_state)

"""Token-space encoding of QA pairs for the span extraction model.

The model input is [CLS] question [SEP] context [SEP] padded to a fixed
length. Context tokens map 1:1 onto the whitespace words of the original
context so spans decode back to exact substrings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, QaPair, tokenize, _strip_edge_punct
from .errors import DataError

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP)

_WORD_RE = re.compile(r"\S+")


def word_token(word: str) -> str:
    """Model token for one raw context word; punctuation-only words become UNK."""
    return _strip_edge_punct(word.lower()) or UNK


def build_vocab(*corpora: Corpus) -> dict[str, int]:
    """Vocabulary over question and context tokens, specials first, rest sorted."""
    tokens = set()
    for corpus in corpora:
        for pair in corpus:
            tokens.update(tokenize(pair.question))
            tokens.update(word_token(w) for w in pair.context.split())
    tokens.discard(UNK)
    vocab = {tok: i for i, tok in enumerate(SPECIAL_TOKENS)}
    for tok in sorted(tokens):
        vocab[tok] = len(vocab)
    return vocab


@dataclass
class EncodedExample:
    """One pair in token space, padded to max_seq_len.

    ``word_index`` aligns each context token position with its context word
    index (-1 elsewhere). ``usable`` is False when truncation cut off the
    gold span; unusable examples are skipped by training but still predictable.
    """

    pair_id: str
    ids: np.ndarray
    n_real: int
    context_span: tuple[int, int]
    word_index: np.ndarray
    gold_start: int | None
    gold_end: int | None
    usable: bool


def _gold_word_span(pair: QaPair) -> tuple[int, int]:
    a0 = pair.answer_start
    a1 = a0 + len(pair.answer_text)
    first = last = None
    for i, m in enumerate(_WORD_RE.finditer(pair.context)):
        if first is None and m.end() > a0:
            first = i
        if m.start() < a1:
            last = i
        else:
            break
    if first is None or last is None or last < first:
        raise DataError(f"pair {pair.id!r}: answer span covers no context words")
    return first, last


def encode_example(pair: QaPair, config) -> EncodedExample:
    """Encode one pair against ``config`` (needs .vocab and .max_seq_len)."""
    vocab = config.vocab
    max_len = config.max_seq_len
    unk = vocab[UNK]

    q_tokens = tokenize(pair.question)[: max_len - 4]  # leave room for >= 1 context token
    words = pair.context.split()
    capacity = max_len - 3 - len(q_tokens)
    kept = min(len(words), capacity)

    ids = np.full(max_len, vocab[PAD], dtype=np.int64)
    ids[0] = vocab[CLS]
    for i, tok in enumerate(q_tokens):
        ids[1 + i] = vocab.get(tok, unk)
    sep1 = 1 + len(q_tokens)
    ids[sep1] = vocab[SEP]
    c_first = sep1 + 1
    word_index = np.full(max_len, -1, dtype=np.int64)
    for j in range(kept):
        ids[c_first + j] = vocab.get(word_token(words[j]), unk)
        word_index[c_first + j] = j
    ids[c_first + kept] = vocab[SEP]
    n_real = c_first + kept + 1

    gw0, gw1 = _gold_word_span(pair)
    usable = gw1 < kept
    return EncodedExample(
        pair_id=pair.id,
        ids=ids,
        n_real=n_real,
        context_span=(c_first, c_first + kept - 1),
        word_index=word_index,
        gold_start=c_first + gw0 if usable else None,
        gold_end=c_first + gw1 if usable else None,
        usable=usable,
    )


def encode_corpus(corpus: Corpus, config) -> list[EncodedExample]:
    return [encode_example(pair, config) for pair in corpus]


def decode_answer(span, pair: QaPair, word_index: np.ndarray) -> str:
    """Original context words covered by a token span, joined by single spaces."""
    w0 = int(word_index[span.start])
    w1 = int(word_index[span.end])
    if w0 < 0 or w1 < 0:
        raise DataError(f"pair {pair.id!r}: span ({span.start}, {span.end}) not in context")
    return " ".join(pair.context.split()[w0 : w1 + 1])

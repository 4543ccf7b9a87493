"""Extractive-QA data model, ingestion, canonical storage, and synthetic domains.

A corpus is an ordered list of question/context/answer records where every
answer is a character-indexed span of its context. Real data comes in via
SQuAD v1.1 JSON or the canonical line-delimited JSON format; synthetic
two-domain corpora are generated from closed pseudo-word vocabularies so
that desk-scale experiments have a controllable domain gap.
"""

from __future__ import annotations

import json
import unicodedata
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DataError, GenerationError, SpecError

# Everything in the package that needs words (stats, encoding, synthetic
# generation) uses this one rule: lowercase, whitespace split, strip
# punctuation off token edges.


def is_punct_char(ch: str) -> bool:
    """True for characters in the Unicode P* general categories."""
    return unicodedata.category(ch).startswith("P")


def _strip_edge_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and is_punct_char(token[start]):
        start += 1
    while end > start and is_punct_char(token[end - 1]):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Shared tokenization: lowercase, split on whitespace, strip edge punctuation.

    Tokens that are pure punctuation vanish.
    """
    out = []
    for raw in text.lower().split():
        tok = _strip_edge_punct(raw)
        if tok:
            out.append(tok)
    return out


@dataclass(frozen=True)
class QaPair:
    """One question/context/answer record with a character-indexed span.

    ``extra_answers`` holds auxiliary reference answers (SQuAD dev sets carry
    several per question); the first reference is the single gold answer.
    """

    id: str
    question: str
    context: str
    answer_text: str
    answer_start: int
    domain_tag: str = ""
    extra_answers: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.question or not self.context:
            raise DataError(f"pair {self.id!r}: question and context must be non-empty")
        if not self.answer_text:
            raise DataError(f"pair {self.id!r}: answer_text must be non-empty")
        end = self.answer_start + len(self.answer_text)
        if self.answer_start < 0 or end > len(self.context):
            raise DataError(
                f"pair {self.id!r}: answer span [{self.answer_start}, {end}) "
                f"outside context of length {len(self.context)}"
            )
        if self.context[self.answer_start:end] != self.answer_text:
            raise DataError(
                f"pair {self.id!r}: context slice at {self.answer_start} does not "
                f"match answer_text"
            )

    @property
    def all_answers(self) -> tuple[str, ...]:
        return (self.answer_text,) + self.extra_answers


@dataclass(frozen=True)
class Corpus:
    """Named, ordered collection of QaPairs with unique ids."""

    name: str
    pairs: tuple[QaPair, ...]

    def __post_init__(self):
        if not isinstance(self.pairs, tuple):
            object.__setattr__(self, "pairs", tuple(self.pairs))
        seen = set()
        for p in self.pairs:
            if p.id in seen:
                raise DataError(f"corpus {self.name!r}: duplicate id {p.id!r}")
            seen.add(p.id)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, i) -> QaPair:
        return self.pairs[i]

    def ids(self) -> list[str]:
        return [p.id for p in self.pairs]

    def subset(self, indices, name: str | None = None) -> "Corpus":
        pairs = tuple(self.pairs[i] for i in indices)
        return Corpus(name or self.name, pairs)


def concat_corpora(name: str, corpora) -> Corpus:
    """Concatenate training corpora (ids must stay globally unique)."""
    pairs = []
    for c in corpora:
        pairs.extend(c.pairs)
    return Corpus(name, tuple(pairs))


# ---------------------------------------------------------------------------
# SQuAD v1.1 ingestion
# ---------------------------------------------------------------------------


def load_squad_json(path) -> Corpus:
    """Load a SQuAD v1.1-shaped JSON file (data -> paragraphs -> qas).

    The first reference answer becomes the gold answer; any remaining
    references are kept as auxiliary answers for max-over-references scoring.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc

    pairs = []
    bad_ids = []
    try:
        articles = doc["data"]
    except (TypeError, KeyError):
        raise DataError(f"{path}: missing top-level 'data' array")
    for article in articles:
        for paragraph in article.get("paragraphs", []):
            context = paragraph["context"]
            for qa in paragraph.get("qas", []):
                qid = str(qa["id"])
                answers = qa.get("answers", [])
                if not answers:
                    bad_ids.append(qid)
                    continue
                gold = answers[0]
                extra = tuple(a["text"] for a in answers[1:])
                start = int(gold["answer_start"])
                text = gold["text"]
                end = start + len(text)
                if context[start:end] != text:
                    bad_ids.append(qid)
                    continue
                pairs.append(
                    QaPair(
                        id=qid,
                        question=qa["question"],
                        context=context,
                        answer_text=text,
                        answer_start=start,
                        domain_tag=path.stem,
                        extra_answers=extra,
                    )
                )
    if bad_ids:
        raise DataError(
            f"{path}: {len(bad_ids)} record(s) with missing or misaligned answers: "
            + ", ".join(bad_ids[:20])
        )
    return Corpus(path.stem, tuple(pairs))


# ---------------------------------------------------------------------------
# Canonical line-delimited JSON
# ---------------------------------------------------------------------------

_CANONICAL_FIELDS = ("id", "question", "context", "answer_text", "answer_start", "domain_tag")


def save_canonical(corpus: Corpus, path) -> None:
    """Write one JSON object per line, UTF-8, LF line endings."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in corpus.pairs:
            rec = {
                "id": p.id,
                "question": p.question,
                "context": p.context,
                "answer_text": p.answer_text,
                "answer_start": p.answer_start,
                "domain_tag": p.domain_tag,
            }
            if p.extra_answers:
                rec["extra_answers"] = list(p.extra_answers)
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_canonical(path, name: str | None = None) -> Corpus:
    """Read a canonical line-delimited JSON corpus; inverse of save_canonical."""
    path = Path(path)
    pairs = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}: line {lineno}: malformed JSON: {exc.msg}") from exc
                for fieldname in _CANONICAL_FIELDS:
                    if fieldname not in rec:
                        raise DataError(f"{path}: line {lineno}: missing field {fieldname!r}")
                pairs.append(
                    QaPair(
                        id=str(rec["id"]),
                        question=rec["question"],
                        context=rec["context"],
                        answer_text=rec["answer_text"],
                        answer_start=int(rec["answer_start"]),
                        domain_tag=rec["domain_tag"],
                        extra_answers=tuple(rec.get("extra_answers", ())),
                    )
                )
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not pairs:
        warnings.warn(f"{path}: empty corpus file", stacklevel=2)
    return Corpus(name if name is not None else path.stem, tuple(pairs))


# ---------------------------------------------------------------------------
# Synthetic two-domain generator
# ---------------------------------------------------------------------------

_STOP_WORDS = ("of", "to", "in", "on", "at", "by", "it", "is", "and")
_MAX_SENTENCE_WORDS = 50
_MAX_ANSWER_WORDS = _MAX_SENTENCE_WORDS - 2
_DIST_TOL = 1e-9


@dataclass(frozen=True)
class SynthDomainSpec:
    """Recipe for one synthetic domain.

    ``answer_length_distribution`` maps answer length in words to probability;
    ``prefix_distribution`` maps an initial question phrase to probability.
    """

    name: str
    n_pairs: int
    answer_length_distribution: tuple[tuple[int, float], ...]
    prefix_distribution: tuple[tuple[str, float], ...]
    vocabulary_size: int
    context_sentences: tuple[int, int]
    seed: int

    def __post_init__(self):
        object.__setattr__(
            self, "answer_length_distribution", tuple(tuple(e) for e in self.answer_length_distribution)
        )
        object.__setattr__(
            self, "prefix_distribution", tuple(tuple(e) for e in self.prefix_distribution)
        )
        if self.n_pairs < 1:
            raise SpecError(f"domain {self.name!r}: n_pairs must be >= 1")
        if self.vocabulary_size < 1:
            raise SpecError(f"domain {self.name!r}: vocabulary_size must be >= 1")
        lo, hi = self.context_sentences
        if not (1 <= lo <= hi):
            raise SpecError(f"domain {self.name!r}: bad context_sentences range {self.context_sentences}")
        for label, dist in (
            ("answer_length_distribution", self.answer_length_distribution),
            ("prefix_distribution", self.prefix_distribution),
        ):
            if not dist:
                raise SpecError(f"domain {self.name!r}: {label} is empty")
            probs = [p for _, p in dist]
            if any(p < 0 for p in probs):
                raise SpecError(f"domain {self.name!r}: {label} has negative probability")
            if abs(sum(probs) - 1.0) > _DIST_TOL:
                raise SpecError(
                    f"domain {self.name!r}: {label} sums to {sum(probs)!r}, expected 1"
                )
        for length, _ in self.answer_length_distribution:
            if length < 1:
                raise SpecError(f"domain {self.name!r}: answer length {length} < 1")
            if length > _MAX_ANSWER_WORDS:
                raise SpecError(
                    f"domain {self.name!r}: answer length {length} exceeds the longest "
                    f"generatable sentence ({_MAX_ANSWER_WORDS} answer words)"
                )

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "n_pairs": self.n_pairs,
            "answer_length_distribution": [list(e) for e in self.answer_length_distribution],
            "prefix_distribution": [list(e) for e in self.prefix_distribution],
            "vocabulary_size": self.vocabulary_size,
            "context_sentences": list(self.context_sentences),
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SynthDomainSpec":
        try:
            return cls(
                name=d["name"],
                n_pairs=int(d["n_pairs"]),
                answer_length_distribution=tuple(
                    (int(l), float(p)) for l, p in d["answer_length_distribution"]
                ),
                prefix_distribution=tuple((str(w), float(p)) for w, p in d["prefix_distribution"]),
                vocabulary_size=int(d["vocabulary_size"]),
                context_sentences=tuple(int(x) for x in d["context_sentences"]),
                seed=int(d["seed"]),
            )
        except KeyError as exc:
            raise SpecError(f"synthetic domain spec missing field {exc.args[0]!r}") from exc


def _pseudo_vocab(size: int) -> list[str]:
    width = max(4, len(str(size - 1)))
    return [f"tok{i:0{width}d}" for i in range(size)]


def _count_subsequence(words: list[str], sub: list[str]) -> int:
    n, m = len(words), len(sub)
    return sum(1 for i in range(n - m + 1) if words[i:i + m] == sub)


def _sentence_words(rng, vocab: list[str], n_words: int) -> list[str]:
    # First word of every sentence is a content word; the rest mix in stop words.
    words = [vocab[rng.integers(len(vocab))]]
    for _ in range(n_words - 1):
        if rng.random() < 0.25:
            words.append(_STOP_WORDS[rng.integers(len(_STOP_WORDS))])
        else:
            words.append(vocab[rng.integers(len(vocab))])
    return words


def generate_synthetic(spec: SynthDomainSpec, max_retries: int = 20) -> Corpus:
    """Generate a deterministic corpus from a SynthDomainSpec.

    Every answer is a contiguous word span of its context, drawn with the
    requested word-length distribution, and occurs exactly once in the
    context (colliding sentences are regenerated, up to ``max_retries``
    rounds per pair). Questions start with a phrase from the prefix
    distribution followed by two cue words: the context word right before
    the answer and the first answer word.
    """
    rng = np.random.default_rng(spec.seed)
    vocab = _pseudo_vocab(spec.vocabulary_size)

    lengths = np.array([l for l, _ in spec.answer_length_distribution])
    lp = np.array([p for _, p in spec.answer_length_distribution], dtype=float)
    lp = lp / lp.sum()
    phrases = [w for w, _ in spec.prefix_distribution]
    pp = np.array([p for _, p in spec.prefix_distribution], dtype=float)
    pp = pp / pp.sum()

    cs_lo, cs_hi = spec.context_sentences
    pairs = []
    for i in range(spec.n_pairs):
        ans_len = int(lengths[rng.choice(len(lengths), p=lp)])
        n_sents = int(rng.integers(cs_lo, cs_hi + 1))
        ans_sent = int(rng.integers(0, n_sents))
        answer_words = [vocab[rng.integers(len(vocab))] for _ in range(ans_len)]

        def pad_words(lo, hi):
            k = int(rng.integers(lo, hi + 1))
            return [
                _STOP_WORDS[rng.integers(len(_STOP_WORDS))]
                if rng.random() < 0.25
                else vocab[rng.integers(len(vocab))]
                for _ in range(k)
            ]

        # The answer never starts at context word 0 so a pre-span cue exists.
        pre = pad_words(1 if ans_sent == 0 else 0, 3)
        post = pad_words(0, 3)
        others = [
            _sentence_words(rng, vocab, int(rng.integers(5, 10)))
            for _ in range(n_sents - 1)
        ]

        for attempt in range(max_retries + 1):
            sentences = others[:ans_sent] + [pre + answer_words + post] + others[ans_sent:]
            flat = [w for s in sentences for w in s]
            if _count_subsequence(flat, answer_words) == 1:
                break
            if attempt == max_retries:
                raise GenerationError(
                    f"domain {spec.name!r}: pair {i}: could not make the answer unique "
                    f"after {max_retries} retries"
                )
            pre = pad_words(1 if ans_sent == 0 else 0, 3)
            post = pad_words(0, 3)
            others = [
                _sentence_words(rng, vocab, len(s)) for s in others
            ]

        ans_word_pos = len([w for s in sentences[:ans_sent] for w in s]) + len(pre)
        answer_text = " ".join(answer_words)
        answer_start = sum(len(w) + 1 for w in flat[:ans_word_pos])
        context = " ".join(flat)

        phrase = phrases[int(rng.choice(len(phrases), p=pp))]
        w_pre = flat[ans_word_pos - 1]
        question = f"{phrase} {w_pre} {answer_words[0]}?"

        pairs.append(
            QaPair(
                id=f"{spec.name}-{i:06d}",
                question=question,
                context=context,
                answer_text=answer_text,
                answer_start=answer_start,
                domain_tag=spec.name,
            )
        )
    return Corpus(spec.name, tuple(pairs))


# ---------------------------------------------------------------------------
# Domain presets: a short-answer "general" style domain and a long-answer
# "manual" style domain with disjoint question prefixes.
# ---------------------------------------------------------------------------

_GENERAL_LENGTHS = (
    (1, 0.30), (2, 0.22), (3, 0.18), (4, 0.10), (5, 0.05),
    (6, 0.04), (7, 0.03), (8, 0.02), (10, 0.02), (12, 0.01),
    (15, 0.01), (18, 0.005), (22, 0.005), (25, 0.005), (28, 0.005),
)
_GENERAL_PREFIXES = (
    ("who", 0.16), ("what was", 0.15), ("how many", 0.14), ("when did", 0.12),
    ("where is", 0.11), ("what is", 0.12), ("how long", 0.10), ("who was", 0.10),
)
_MANUAL_LENGTHS = (
    (3, 0.01), (5, 0.01), (8, 0.03), (10, 0.05), (12, 0.08), (15, 0.10),
    (18, 0.12), (20, 0.08), (22, 0.16), (24, 0.13), (26, 0.11),
    (28, 0.08), (30, 0.04),
)
_MANUAL_PREFIXES = (
    ("how do", 0.22), ("what should", 0.18), ("what happens", 0.15),
    ("how should", 0.12), ("how can", 0.10), ("what do", 0.09),
    ("when should", 0.08), ("where do", 0.06),
)


def general_like_spec(n_pairs: int, seed: int, name: str = "general-like") -> SynthDomainSpec:
    """Short-answer domain: 85% of answers are five words or fewer."""
    return SynthDomainSpec(
        name=name,
        n_pairs=n_pairs,
        answer_length_distribution=_GENERAL_LENGTHS,
        prefix_distribution=_GENERAL_PREFIXES,
        vocabulary_size=800,
        context_sentences=(2, 4),
        seed=seed,
    )


def manual_like_spec(n_pairs: int, seed: int, name: str = "manual-like") -> SynthDomainSpec:
    """Long-answer domain: over half the answers exceed twenty words."""
    return SynthDomainSpec(
        name=name,
        n_pairs=n_pairs,
        answer_length_distribution=_MANUAL_LENGTHS,
        prefix_distribution=_MANUAL_PREFIXES,
        vocabulary_size=800,
        context_sentences=(2, 4),
        seed=seed,
    )


PRESETS = {
    "general-like": general_like_spec,
    "manual-like": manual_like_spec,
}


def preset_spec(preset: str, n_pairs: int, seed: int, name: str | None = None) -> SynthDomainSpec:
    if preset not in PRESETS:
        raise SpecError(f"unknown preset {preset!r}; known: {sorted(PRESETS)}")
    spec = PRESETS[preset](n_pairs=n_pairs, seed=seed)
    if name is not None:
        spec = replace(spec, name=name)
    return spec

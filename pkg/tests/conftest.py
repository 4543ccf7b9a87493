import numpy as np
import pytest

from qadapt.corpus import Corpus, QaPair


def make_pair(pid, question, context, answer, domain="test", extra=()):
    start = context.index(answer)
    return QaPair(
        id=pid,
        question=question,
        context=context,
        answer_text=answer,
        answer_start=start,
        domain_tag=domain,
        extra_answers=tuple(extra),
    )


@pytest.fixture
def tiny_corpus():
    pairs = (
        make_pair("p0", "who likes red cars?", "bob likes the red car a lot", "red car"),
        make_pair("p1", "what is fast?", "the plane is very fast indeed", "very fast"),
        make_pair("p2", "where is home?", "my home is on the hill", "on the hill"),
        make_pair("p3", "what was it?", "it was nothing at all", "nothing"),
    )
    return Corpus("tiny", pairs)


@pytest.fixture
def lengths_corpus():
    """Corpus with known answer word-lengths 1, 1, 5, 5."""

    def with_len(pid, n):
        words = " ".join(f"w{i}" for i in range(n))
        ctx = f"start {words} finish"
        return make_pair(pid, f"what is {pid}?", ctx, words)

    return Corpus("lengths", (with_len("a", 1), with_len("b", 1), with_len("c", 5), with_len("d", 5)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

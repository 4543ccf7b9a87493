import json

import numpy as np
import pytest

from qadapt.corpus import (
    Corpus,
    QaPair,
    SynthDomainSpec,
    general_like_spec,
    generate_synthetic,
    load_canonical,
    load_squad_json,
    manual_like_spec,
    save_canonical,
    tokenize,
)
from qadapt.errors import DataError, GenerationError, SpecError

from conftest import make_pair


SQUAD_DOC = {
    "version": "1.1",
    "data": [
        {
            "title": "t",
            "paragraphs": [
                {
                    "context": "The brake pedal stops the car when pressed firmly.",
                    "qas": [
                        {
                            "id": "q1",
                            "question": "What stops the car?",
                            "answers": [{"text": "brake pedal", "answer_start": 4}],
                        },
                        {
                            "id": "q2",
                            "question": "How should it be pressed?",
                            "answers": [
                                {"text": "firmly", "answer_start": 43},
                                {"text": "pressed firmly", "answer_start": 35},
                                {"text": "when pressed firmly", "answer_start": 30},
                            ],
                        },
                    ],
                }
            ],
        }
    ],
}


class TestTokenize:
    def test_basic(self):
        assert tokenize("Press the Brake-pedal, now!") == ["press", "the", "brake-pedal", "now"]

    def test_edge_punct_stripped_inner_kept(self):
        assert tokenize("'don't'") == ["don't"]

    def test_pure_punct_dropped(self):
        assert tokenize("a --- b") == ["a", "b"]


class TestQaPair:
    def test_offset_invariant_enforced(self):
        with pytest.raises(DataError, match="does not match"):
            QaPair(id="x", question="q?", context="abcdef", answer_text="xyz", answer_start=0)

    def test_empty_question_rejected(self):
        with pytest.raises(DataError, match="non-empty"):
            QaPair(id="x", question="", context="abc", answer_text="abc", answer_start=0)

    def test_duplicate_ids_rejected(self):
        p = make_pair("same", "q?", "aa bb", "aa")
        with pytest.raises(DataError, match="duplicate"):
            Corpus("c", (p, p))


class TestSquadLoading:
    def test_structure(self, tmp_path):
        path = tmp_path / "dev.json"
        path.write_text(json.dumps(SQUAD_DOC))
        corpus = load_squad_json(path)
        assert len(corpus) == 2
        assert corpus[0].answer_text == "brake pedal"

    def test_multi_reference(self, tmp_path):
        path = tmp_path / "dev.json"
        path.write_text(json.dumps(SQUAD_DOC))
        corpus = load_squad_json(path)
        q2 = corpus[1]
        assert q2.answer_text == "firmly"
        assert len(q2.extra_answers) == 2

    def test_misaligned_answer_reports_id(self, tmp_path):
        doc = json.loads(json.dumps(SQUAD_DOC))
        doc["data"][0]["paragraphs"][0]["qas"][0]["answers"][0]["answer_start"] = 7
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(DataError, match="q1"):
            load_squad_json(path)

    def test_malformed_json_reports_location(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"data": [')
        with pytest.raises(DataError, match="line"):
            load_squad_json(path)


class TestCanonical:
    def test_round_trip_identity(self, tmp_path, tiny_corpus):
        path = tmp_path / "tiny.jsonl"
        save_canonical(tiny_corpus, path)
        assert load_canonical(path) == tiny_corpus

    def test_round_trip_keeps_extra_answers(self, tmp_path):
        pair = make_pair("a", "q?", "xx yy zz", "yy", extra=("yy zz",))
        corpus = Corpus("c", (pair,))
        path = tmp_path / "c.jsonl"
        save_canonical(corpus, path)
        assert load_canonical(path) == corpus

    def test_empty_file_warns(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.warns(UserWarning, match="empty"):
            corpus = load_canonical(path)
        assert len(corpus) == 0

    def test_missing_field_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = {
            "id": "a", "question": "q?", "context": "xx yy", "answer_text": "xx",
            "answer_start": 0, "domain_tag": "d",
        }
        bad = {k: v for k, v in good.items() if k != "answer_start"}
        bad["id"] = "b"
        path.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n")
        with pytest.raises(DataError, match="line 2.*answer_start"):
            load_canonical(path)

    def test_lf_line_endings(self, tmp_path, tiny_corpus):
        path = tmp_path / "tiny.jsonl"
        save_canonical(tiny_corpus, path)
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.endswith(b"\n")


class TestSyntheticGeneration:
    def test_deterministic(self):
        spec = general_like_spec(100, seed=7)
        assert generate_synthetic(spec) == generate_synthetic(spec)

    def test_deterministic_files_byte_identical(self, tmp_path):
        spec = manual_like_spec(60, seed=3)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_canonical(generate_synthetic(spec), p1)
        save_canonical(generate_synthetic(spec), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_degenerate_length_distribution(self):
        spec = SynthDomainSpec(
            name="deg", n_pairs=50,
            answer_length_distribution=((3, 1.0),),
            prefix_distribution=(("how do", 1.0),),
            vocabulary_size=100, context_sentences=(2, 3), seed=1,
        )
        corpus = generate_synthetic(spec)
        assert all(len(p.answer_text.split()) == 3 for p in corpus)

    def test_offset_invariant_by_slicing(self):
        corpus = generate_synthetic(general_like_spec(200, seed=11))
        for p in corpus:
            assert p.context[p.answer_start : p.answer_start + len(p.answer_text)] == p.answer_text

    def test_answer_occurs_exactly_once(self):
        corpus = generate_synthetic(manual_like_spec(150, seed=5))
        for p in corpus:
            words = p.context.split()
            ans = p.answer_text.split()
            hits = sum(
                1 for i in range(len(words) - len(ans) + 1) if words[i : i + len(ans)] == ans
            )
            assert hits == 1, p.id

    def test_question_prefixes_come_from_spec(self):
        spec = manual_like_spec(100, seed=9)
        corpus = generate_synthetic(spec)
        prefixes = tuple(ph for ph, _ in spec.prefix_distribution)
        assert all(p.question.startswith(prefixes) for p in corpus)

    def test_preset_length_bands_at_n5000(self):
        # general-like concentrates mass at <=5 words, manual-like at >20.
        general = generate_synthetic(general_like_spec(5000, seed=21))
        manual = generate_synthetic(manual_like_spec(5000, seed=22))

        def per_length(corpus):
            lengths = [len(p.answer_text.split()) for p in corpus]
            return {l: lengths.count(l) / len(lengths) for l in set(lengths)}

        for spec, corpus in ((general_like_spec(1, 0), general), (manual_like_spec(1, 0), manual)):
            observed = per_length(corpus)
            for length, prob in spec.answer_length_distribution:
                assert abs(observed.get(length, 0.0) - prob) <= 0.03, (length, prob)

    def test_chi_square_decreases_with_n(self):
        spec_probs = dict(general_like_spec(1, 0).answer_length_distribution)

        def chi2(n):
            corpus = generate_synthetic(general_like_spec(n, seed=33))
            lengths = [len(p.answer_text.split()) for p in corpus]
            stat = 0.0
            for length, prob in spec_probs.items():
                observed = lengths.count(length) / n
                stat += (observed - prob) ** 2 / prob
            return stat

        stats = [chi2(n) for n in (100, 1000, 10000)]
        assert stats[0] > stats[1] > stats[2]

    def test_retry_budget_exhaustion_names_pair(self):
        spec = SynthDomainSpec(
            name="clash", n_pairs=3,
            answer_length_distribution=((1, 1.0),),
            prefix_distribution=(("who", 1.0),),
            vocabulary_size=1, context_sentences=(3, 3), seed=2,
        )
        with pytest.raises(GenerationError, match="pair 0"):
            generate_synthetic(spec)

    def test_overlong_answer_rejected(self):
        with pytest.raises(SpecError, match="longest generatable"):
            SynthDomainSpec(
                name="big", n_pairs=1,
                answer_length_distribution=((49, 1.0),),
                prefix_distribution=(("who", 1.0),),
                vocabulary_size=10, context_sentences=(1, 1), seed=0,
            )

    def test_distribution_must_sum_to_one(self):
        with pytest.raises(SpecError, match="sums to"):
            SynthDomainSpec(
                name="bad", n_pairs=1,
                answer_length_distribution=((1, 0.5), (2, 0.4)),
                prefix_distribution=(("who", 1.0),),
                vocabulary_size=10, context_sentences=(1, 1), seed=0,
            )

    def test_spec_json_round_trip(self):
        spec = general_like_spec(10, seed=4)
        assert SynthDomainSpec.from_json_dict(spec.to_json_dict()) == spec

"""ARPA serialization: round-trips, query agreement, malformed-file errors."""

import math
import random

import pytest

from tokselect import arpa, ngram
from tokselect.errors import FormatError


def _tiny_model():
    return ngram.train([[0, 1], [0, 2], [1, 0]], order=2, vocab_size=3)


class TestRoundTrip:
    def test_values_survive_to_printed_precision(self, tmp_path):
        model = _tiny_model()
        path = tmp_path / "m.arpa"
        arpa.write_arpa(model, path)
        back = arpa.read_arpa(path)
        assert back.order == model.order
        assert back.vocab_size == model.vocab_size
        assert set(back.probs) == set(model.probs)
        assert set(back.bows) == set(model.bows)
        for gram, logp in model.probs.items():
            assert back.probs[gram] == pytest.approx(logp, abs=5e-8)
        for ctx, bow in model.bows.items():
            assert back.bows[ctx] == pytest.approx(bow, abs=5e-8)

    def test_write_is_idempotent_bytes(self, tmp_path):
        model = _tiny_model()
        p1, p2 = tmp_path / "a.arpa", tmp_path / "b.arpa"
        arpa.write_arpa(model, p1)
        arpa.write_arpa(arpa.read_arpa(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_queries_agree_within_tolerance(self, tmp_path):
        rng = random.Random(42)
        corpus = [
            [rng.randrange(6) for _ in range(rng.randint(2, 20))] for _ in range(40)
        ]
        model = ngram.train(corpus, 3, 6)
        path = tmp_path / "m.arpa"
        arpa.write_arpa(model, path)
        back = arpa.read_arpa(path)
        for _ in range(200):
            query = [rng.randrange(6) for _ in range(rng.randint(1, 15))]
            a = model.logprob(query) / len(query)
            b = back.logprob(query) / len(query)
            assert b == pytest.approx(a, abs=1e-6)

    def test_bos_context_entries_preserved(self, tmp_path):
        model = ngram.train([[0, 1, 2]], order=3, vocab_size=3)
        path = tmp_path / "m.arpa"
        arpa.write_arpa(model, path)
        text = path.read_text()
        assert "<s> <s>" in text  # order-2 pure-BOS context with back-off weight
        back = arpa.read_arpa(path)
        assert (model.bos,) in back.bows
        assert (model.bos, model.bos) in back.bows
        assert (model.bos,) not in back.probs

    def test_header_counts_match_body(self, tmp_path):
        model = _tiny_model()
        path = tmp_path / "m.arpa"
        arpa.write_arpa(model, path)
        lines = path.read_text().splitlines()
        declared = {}
        for line in lines:
            if line.startswith("ngram "):
                n, c = line[len("ngram ") :].split("=")
                declared[int(n)] = int(c)
        body = {1: 0, 2: 0}
        current = None
        for line in lines:
            if line.endswith("-grams:"):
                current = int(line[1])
            elif line.strip() and not line.startswith("\\") and current is not None:
                if not line.startswith("ngram"):
                    body[current] += 1
        assert declared == body


class TestMalformed:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.arpa"
        path.write_text("")
        with pytest.raises(FormatError):
            arpa.read_arpa(path)

    def test_count_mismatch_detected(self, tmp_path):
        model = _tiny_model()
        path = tmp_path / "m.arpa"
        arpa.write_arpa(model, path)
        text = path.read_text().splitlines()
        # header says N 2-grams, delete one body line
        for i in range(len(text) - 1, -1, -1):
            if text[i] and not text[i].startswith("\\") and not text[i].startswith("ngram"):
                del text[i]
                break
        bad = tmp_path / "bad.arpa"
        bad.write_text("\n".join(text) + "\n")
        with pytest.raises(FormatError, match="declares"):
            arpa.read_arpa(bad)

    def test_missing_end_marker(self, tmp_path):
        model = _tiny_model()
        path = tmp_path / "m.arpa"
        arpa.write_arpa(model, path)
        text = path.read_text().replace("\\end\\\n", "")
        bad = tmp_path / "bad.arpa"
        bad.write_text(text)
        with pytest.raises(FormatError, match="end"):
            arpa.read_arpa(bad)

    def test_garbage_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.arpa"
        path.write_text("\\data\\\nngram 1=1\n\n\\1-grams:\nnot-a-number 0\n\\end\\\n")
        with pytest.raises(FormatError, match="line 5"):
            arpa.read_arpa(path)

    def test_undeclared_section_rejected(self, tmp_path):
        path = tmp_path / "bad.arpa"
        path.write_text(
            "\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\t0\n\n\\2-grams:\n-0.5\t0 0\n\\end\\\n"
        )
        with pytest.raises(FormatError, match="not declared"):
            arpa.read_arpa(path)


class TestForeignFormat:
    def test_space_separated_entries_accepted(self, tmp_path):
        path = tmp_path / "foreign.arpa"
        path.write_text(
            "\\data\\\n"
            "ngram 1=3\n"
            "\n"
            "\\1-grams:\n"
            "-0.60206 0 -0.30103\n"
            "-0.60206 1\n"
            "-0.60206 </s>\n"
            "\n"
            "\\end\\\n"
        )
        model = arpa.read_arpa(path)
        assert model.vocab_size == 2
        assert model.probs[(0,)] == pytest.approx(math.log10(0.25), abs=1e-5)
        assert model.bows[(0,)] == pytest.approx(math.log10(0.5), abs=1e-5)

import json
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from naslda.corpus_io import from_triples
from naslda.evaluation import (
    DocFrequencies,
    EvalReport,
    classification_metrics,
    coherence,
    match_topics,
    npmi_pair,
    regression_metrics,
    topic_coherence,
    topic_top_words,
    umass_pair,
)


def binary_corpus(B, vocab=None):
    B = np.asarray(B, dtype=bool)
    d, w = np.nonzero(B)
    return from_triples(B.shape[0], B.shape[1], d, w, np.ones(len(d), dtype=np.int64), vocab)


class TestClassification:
    def test_hand_example(self):
        # truth [1, 1] in the 1-based label-file convention is class index 0
        ce, acc = classification_metrics(np.array([[0.9, 0.1], [0.2, 0.8]]), np.array([0, 0]))
        assert ce == pytest.approx((-math.log(0.9) - math.log(0.2)) / 2, abs=1e-12)
        assert ce == pytest.approx(0.8574, abs=1e-4)
        assert acc == 0.5

    def test_perfect(self):
        ce, acc = classification_metrics(np.eye(3), np.arange(3))
        assert ce == pytest.approx(0.0, abs=1e-12) and acc == 1.0

    def test_uniform_and_tie_rule(self):
        ce, acc = classification_metrics(np.full((4, 2), 0.5), np.array([0, 0, 1, 1]))
        assert ce == pytest.approx(math.log(2))
        assert acc == 0.5  # ties go to class 0

    def test_floor(self):
        ce, acc = classification_metrics(np.array([[1.0, 0.0]]), np.array([1]))
        assert ce == pytest.approx(-math.log(1e-12)) and acc == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            classification_metrics(np.eye(2), np.array([0, 1, 1]))

    @settings(max_examples=50)
    @given(st.integers(1, 20), st.integers(2, 5), st.integers(0, 2 ** 31))
    def test_bounds(self, n, S, seed):
        rng = np.random.default_rng(seed)
        probs = rng.dirichlet(np.ones(S), size=n)
        ce, acc = classification_metrics(probs, rng.integers(0, S, size=n))
        assert ce >= 0 and 0 <= acc <= 1

    def test_regression(self):
        out = regression_metrics(np.array([1.0, 2.0]), np.array([1.0, 4.0]))
        assert out == {"mse": 2.0, "mae": 1.0}


class TestTopWords:
    def test_examples(self):
        assert topic_top_words(np.array([[0.5, 0.3, 0.2]]), ["a", "b", "c"], 2) == [["a", "b"]]
        assert topic_top_words(np.full((1, 4), 0.25), list("abcd"), 3) == [["a", "b", "c"]]
        assert topic_top_words(np.array([[0.1, 0.6, 0.3]]), list("abc"), 3) == [["b", "c", "a"]]

    def test_n_too_large(self):
        with pytest.raises(ValueError):
            topic_top_words(np.full((1, 2), 0.5), ["a", "b"], 3)


class TestCoherence:
    def test_always_cooccur(self):
        B = np.zeros((100, 3), dtype=bool)
        B[:50, :2] = True
        B[50:, 2] = True
        freqs = DocFrequencies(binary_corpus(B))
        assert topic_coherence([0, 1], freqs) > 0.9

    def test_never_cooccur(self):
        B = np.zeros((10, 2), dtype=bool)
        B[:5, 0] = True
        B[5:, 1] = True
        value = topic_coherence([0, 1], DocFrequencies(binary_corpus(B)))
        # add-one smoothing: p_ij = 1/11, p_i = p_j = 6/11
        expected = math.log((1 / 11) / (6 / 11) ** 2) / -math.log(1 / 11)
        assert value == pytest.approx(expected, abs=1e-12)
        assert value < 0

    def test_single_word(self):
        freqs = DocFrequencies(binary_corpus([[1, 1]]))
        assert topic_coherence([0], freqs) == 0.0
        assert topic_coherence([0], freqs, "umass") == 0.0

    def test_umass(self):
        B = [[1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1]]
        freqs = DocFrequencies(binary_corpus(B))
        # pairs (w1 | w0), (w2 | w0), (w2 | w1): df = [3, 3, 3], joint all 2
        expected = 3 * math.log(3 / 3)
        assert topic_coherence([0, 1, 2], freqs, "umass") == pytest.approx(expected)
        assert umass_pair(2, 0, 4) == pytest.approx(math.log(0.5))

    def test_missing_word_warns(self, caplog):
        freqs = DocFrequencies(binary_corpus([[1, 1]], ["a", "b"]))
        with caplog.at_level(logging.WARNING):
            value = topic_coherence(["a", "zz"], freqs)
        assert value == -1.0
        assert "zz" in caplog.text

    def test_zero_frequency_word_counts_as_absent(self, caplog):
        # word 2 is in the vocabulary but occurs in no document
        freqs = DocFrequencies(binary_corpus([[1, 1, 0], [1, 0, 0]], ["a", "b", "c"]))
        with caplog.at_level(logging.WARNING):
            assert topic_coherence(["a", "c"], freqs) == -1.0
            assert topic_coherence(["c", "a"], freqs, "umass") == pytest.approx(math.log(1 / 2))
        assert "c" in caplog.text

    def test_unknown_measure(self):
        with pytest.raises(ValueError):
            topic_coherence([0, 1], DocFrequencies(binary_corpus([[1, 1]])), "cv")

    def test_npmi_range(self):
        assert npmi_pair(5, 5, 5, 5) == 1.0
        assert -1.0 <= npmi_pair(3, 4, 0, 10) <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 30), st.data())
    def test_monotone_in_cooccurrence(self, D, data):
        df_i = data.draw(st.integers(0, D))
        df_j = data.draw(st.integers(0, D))
        df_ij = data.draw(st.integers(max(0, df_i + df_j - D), min(df_i, df_j)))
        before = npmi_pair(df_i, df_j, df_ij, D)
        # a new document holding the pair
        assert npmi_pair(df_i + 1, df_j + 1, df_ij + 1, D + 1) >= before - 1e-12
        # word j added to a document that had only word i
        if df_i > df_ij:
            assert npmi_pair(df_i, df_j + 1, df_ij + 1, D) >= before - 1e-12

    def test_monotone_on_corpus(self, rng):
        B = rng.random((12, 4)) < 0.4
        B[:, 3] |= ~B.any(axis=1)
        before = coherence([[0, 1]], binary_corpus(B))[1]
        after = coherence([[0, 1]], binary_corpus(np.vstack([B, [[1, 1, 0, 0]]])))[1]
        assert after >= before

    def test_deterministic_report(self, rng):
        B = rng.random((20, 6)) < 0.5
        B[:, 0] = True
        corpus = binary_corpus(B, [f"w{i}" for i in range(6)])
        reports = []
        for _ in range(2):
            phi = np.tile(np.arange(6, 0, -1) / 21.0, (2, 1))
            words = topic_top_words(phi, corpus.vocabulary, 4)
            per, mean = coherence(words, corpus)
            reports.append(EvalReport(0.5, 0.75, "npmi", per, mean, words).to_json())
        assert reports[0] == reports[1]
        parsed = json.loads(reports[0])
        assert parsed["note"].startswith("coherence: UMass")
        assert all(len(t) == 4 for t in parsed["top_words"])


class TestReport:
    def test_text_and_csv(self):
        report = EvalReport(0.25, 0.9, "npmi", [0.1, 0.2], 0.15, [["a", "b"], ["c", "d"]])
        text = report.to_text()
        assert "accuracy" in text and "topic 1" in text
        assert report.coherence_csv().splitlines() == ["topic,coherence", "0,0.1", "1,0.2"]


def test_match_topics():
    truth = np.array([[0.7, 0.2, 0.1], [0.1, 0.1, 0.8]])
    cols, tv = match_topics(truth[::-1], truth)
    assert cols.tolist() == [1, 0]
    assert tv == 0.0

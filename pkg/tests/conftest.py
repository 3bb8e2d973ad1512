import sys

import numpy as np
import pytest

from naslda.corpus_io import CLASSIFICATION, LabelSet, from_triples


def random_corpus(rng, max_docs=4, max_words=5, max_count=3, min_docs=1):
    """Random tiny corpus; every document gets at least one entry."""
    D = int(rng.integers(min_docs, max_docs + 1))
    W = int(rng.integers(1, max_words + 1))
    mask = rng.random((D, W)) < 0.6
    for d in range(D):
        if not mask[d].any():
            mask[d, rng.integers(W)] = True
    docs, words = np.nonzero(mask)
    counts = rng.integers(1, max_count + 1, size=len(docs))
    return from_triples(D, W, docs, words, counts)


def random_labels(rng, D, S=2):
    return LabelSet(CLASSIFICATION, rng.integers(0, S, size=D), S)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_corpus():
    # three documents sharing word 0, as in the platypus example
    return from_triples(
        3, 7,
        [0, 0, 0, 1, 1, 1, 2, 2, 2],
        [0, 1, 2, 0, 3, 4, 0, 5, 6],
        [1, 2, 1, 2, 1, 1, 1, 1, 3],
        ["platypus", "clinic", "ill", "australia", "east", "eat", "shrimp"],
    )


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)

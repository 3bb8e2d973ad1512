"""Held-out classification metrics, topic coherence and top-word reports."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus_io import Corpus, LabelSet

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
SUBSTITUTION_NOTE = "coherence: UMass / document-window NPMI (substitute for C_V)"


def classification_metrics(probs, truth):
    """(mean cross-entropy, accuracy).  ``truth`` is a LabelSet or 0-based ints.

    Accuracy ties go to the lowest class index (np.argmax semantics).
    """
    values = truth.values if isinstance(truth, LabelSet) else np.asarray(truth)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[0] != len(values):
        raise ValueError(f"{probs.shape[0]} predictions for {len(values)} labels")
    if len(values) == 0:
        return 0.0, 0.0
    p_true = np.maximum(probs[np.arange(len(values)), values], PROB_FLOOR)
    ce = float(np.mean(-np.log(p_true)))
    acc = float(np.mean(np.argmax(probs, axis=1) == values))
    return max(ce, 0.0), acc


def regression_metrics(scores, truth):
    values = truth.values if isinstance(truth, LabelSet) else np.asarray(truth)
    resid = np.asarray(scores) - values
    return {"mse": float(np.mean(resid ** 2)), "mae": float(np.mean(np.abs(resid)))}


def top_word_ids(phi, N):
    phi = np.asarray(phi)
    if N > phi.shape[1]:
        raise ValueError(f"N={N} exceeds vocabulary size {phi.shape[1]}")
    # stable sort on -phi keeps ties in word-index order
    return np.argsort(-phi, axis=1, kind="stable")[:, :N]


def topic_top_words(phi, vocab, N=15):
    return [[vocab[i] for i in row] for row in top_word_ids(phi, N)]


class DocFrequencies:
    """Document and pair document frequencies over a reference corpus.

    Co-occurrence uses the whole document as the window.
    """

    def __init__(self, corpus: Corpus):
        self.num_docs = corpus.num_docs
        self.vocabulary = corpus.vocabulary
        self.index = {w: i for i, w in enumerate(corpus.vocabulary)}
        B = np.zeros((corpus.num_docs, corpus.num_words), dtype=np.float64)
        B[corpus.docs, corpus.words] = 1.0
        self._B = B
        self.df = B.sum(axis=0)

    def ids(self, words):
        out = []
        for w in words:
            i = self.index.get(w, -1) if isinstance(w, str) else int(w)
            out.append(i)
        return out

    def joint(self, i, j):
        return float(self._B[:, i] @ self._B[:, j])


def npmi_pair(df_i, df_j, df_ij, D):
    """Add-one smoothed NPMI of a word pair over D documents."""
    p_ij = (df_ij + 1.0) / (D + 1.0)
    p_i = (df_i + 1.0) / (D + 1.0)
    p_j = (df_j + 1.0) / (D + 1.0)
    denom = -math.log(p_ij)
    if denom == 0.0:
        return 1.0
    return math.log(p_ij / (p_i * p_j)) / denom


def umass_pair(df_j, df_ij, D):
    """log((D(w_i, w_j) + 1) / D(w_j)) where w_j ranks above w_i."""
    if df_j == 0:
        return math.log(1.0 / max(D, 1))
    return math.log((df_ij + 1.0) / df_j)


def topic_coherence(words, freqs: DocFrequencies, measure="npmi"):
    """Coherence of one ranked top-word list.

    NPMI is the mean over pairs, UMass the sum over ordered pairs.
    """
    # a vocabulary word that never occurs in the reference corpus is as
    # absent as one outside its vocabulary
    ids = [i if i >= 0 and freqs.df[i] > 0 else -1 for i in freqs.ids(words)]
    missing = [w for w, i in zip(words, ids) if i < 0]
    if missing:
        logger.warning("words absent from reference corpus: %s", missing)
    D = freqs.num_docs
    scores = []
    for a, b in combinations(range(len(ids)), 2):
        i, j = ids[b], ids[a]  # a ranks above b
        if i < 0 or j < 0:
            scores.append(-1.0 if measure == "npmi" else math.log(1.0 / max(D, 1)))
            continue
        df_ij = freqs.joint(i, j)
        if measure == "npmi":
            scores.append(npmi_pair(freqs.df[i], freqs.df[j], df_ij, D))
        elif measure == "umass":
            scores.append(umass_pair(freqs.df[j], df_ij, D))
        else:
            raise ValueError(f"unknown coherence measure {measure!r}")
    if not scores:
        return 0.0
    return float(np.mean(scores)) if measure == "npmi" else float(np.sum(scores))


def coherence(top_words, reference: Corpus, measure="npmi"):
    """(per-topic coherence list, mean)."""
    freqs = DocFrequencies(reference)
    per_topic = [topic_coherence(words, freqs, measure) for words in top_words]
    return per_topic, float(np.mean(per_topic)) if per_topic else 0.0


def match_topics(phi_est, phi_true):
    """Best permutation by total-variation distance.

    Returns (assignment of estimated row per true topic, mean TV distance).
    """
    phi_est, phi_true = np.asarray(phi_est), np.asarray(phi_true)
    tv = 0.5 * np.abs(phi_true[:, None, :] - phi_est[None, :, :]).sum(axis=2)
    rows, cols = linear_sum_assignment(tv)
    return cols, float(tv[rows, cols].mean())


@dataclass
class EvalReport:
    cross_entropy: float | None = None
    accuracy: float | None = None
    coherence_measure: str = "npmi"
    coherence_per_topic: list = field(default_factory=list)
    coherence_mean: float | None = None
    top_words: list = field(default_factory=list)
    regression: dict | None = None
    note: str = SUBSTITUTION_NOTE

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def to_text(self):
        lines = [f"# {self.note}"]
        if self.accuracy is not None:
            lines.append(f"{'cross_entropy':<16}{self.cross_entropy:>12.6f}")
            lines.append(f"{'accuracy':<16}{self.accuracy:>12.6f}")
        if self.regression:
            for k, v in self.regression.items():
                lines.append(f"{k:<16}{v:>12.6f}")
        if self.coherence_mean is not None:
            lines.append(f"{'coherence_' + self.coherence_measure:<16}{self.coherence_mean:>12.6f}")
        for k, words in enumerate(self.top_words):
            c = self.coherence_per_topic[k] if k < len(self.coherence_per_topic) else float("nan")
            lines.append(f"topic {k:<4}{c:>10.4f}  " + " ".join(words))
        return "\n".join(lines)

    def coherence_csv(self):
        rows = ["topic,coherence"]
        rows += [f"{k},{c!r}" for k, c in enumerate(self.coherence_per_topic)]
        return "\n".join(rows) + "\n"

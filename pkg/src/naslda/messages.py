"""Per-pair topic messages and the aggregate sums built from them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus_io import Corpus, LabelSet

# sums at or below this are treated as zero by normalize_k
UNDERFLOW_FLOOR = np.finfo(np.float64).tiny


def normalize_k(vec, axis=-1):
    """Divide by the sum over the last axis.

    Rows whose sum is at or below the underflow floor become uniform.
    """
    vec = np.asarray(vec, dtype=np.float64)
    if np.any(vec < 0):
        raise ValueError("normalize_k: negative component")
    total = vec.sum(axis=axis, keepdims=True)
    degenerate = total <= UNDERFLOW_FLOOR
    if not degenerate.any():
        return vec / total
    K = vec.shape[axis]
    out = vec / np.where(degenerate, 1.0, total)
    return np.where(degenerate, 1.0 / K, out)


@dataclass
class MessageState:
    """Message vectors aligned with ``corpus`` entries, shape (NNZ, K)."""

    messages: np.ndarray
    iteration: int = 0

    @property
    def K(self) -> int:
        return int(self.messages.shape[1])

    def copy(self) -> "MessageState":
        return MessageState(self.messages.copy(), self.iteration)

    def check_simplex(self, tol=1e-9) -> bool:
        m = self.messages
        return bool(np.all(m >= 0) and np.all(np.abs(m.sum(axis=1) - 1.0) <= tol))


def init_messages(corpus: Corpus, K: int, seed: int) -> MessageState:
    if K < 1:
        raise ValueError("topics must be >= 1")
    rng = np.random.default_rng(seed)
    # uniform on the open interval (0, 1)
    raw = 1.0 - rng.random((corpus.nnz, K))
    return MessageState(raw / raw.sum(axis=1, keepdims=True))


@dataclass
class AggregateCache:
    """Running topic-mass sums.

    doc_sums (D, K), word_sums (W, K), topic_totals (K,) = word_sums summed
    over words, label_sums (S, K) for classification labels, and
    word_mass_totals (W,) = total count of each word.
    """

    doc_sums: np.ndarray
    word_sums: np.ndarray
    topic_totals: np.ndarray
    word_mass_totals: np.ndarray
    label_sums: np.ndarray | None = None


def weighted_messages(corpus: Corpus, state: MessageState) -> np.ndarray:
    if state.messages.shape[0] != corpus.nnz:
        raise ValueError(
            f"message count {state.messages.shape[0]} does not match corpus NNZ {corpus.nnz}"
        )
    return corpus.counts[:, None] * state.messages


def _scatter_sum(index, values, size):
    out = np.zeros((size, values.shape[1]))
    np.add.at(out, index, values)
    return out


def label_sums_from(doc_sums, labels: LabelSet):
    return _scatter_sum(labels.values, doc_sums, labels.num_classes)


def rebuild_cache(corpus: Corpus, state: MessageState, labels: LabelSet | None = None) -> AggregateCache:
    """Full recompute of every cached sum."""
    contrib = weighted_messages(corpus, state)
    doc_sums = _scatter_sum(corpus.docs, contrib, corpus.num_docs)
    word_sums = _scatter_sum(corpus.words, contrib, corpus.num_words)
    mass = np.bincount(corpus.words, weights=corpus.counts, minlength=corpus.num_words)
    label_sums = None
    if labels is not None and labels.is_classification:
        if len(labels) != corpus.num_docs:
            raise ValueError("label count does not match corpus")
        label_sums = label_sums_from(doc_sums, labels)
    return AggregateCache(doc_sums, word_sums, word_sums.sum(axis=0), mass, label_sums)


def update_cache(cache: AggregateCache, corpus: Corpus, idx, old, new, labels=None):
    """Apply message changes for entries ``idx`` by subtraction and addition."""
    x = corpus.counts[idx][:, None]
    delta = x * new - x * old
    np.add.at(cache.doc_sums, corpus.docs[idx], delta)
    np.add.at(cache.word_sums, corpus.words[idx], delta)
    cache.topic_totals += delta.sum(axis=0)
    if cache.label_sums is not None and labels is not None:
        np.add.at(cache.label_sums, labels.values[corpus.docs[idx]], delta)


def estimate_theta(corpus: Corpus, state: MessageState, alpha: float, cache=None) -> np.ndarray:
    """Document-topic proportions, shape (D, K)."""
    if cache is None:
        cache = rebuild_cache(corpus, state)
    return normalize_k(cache.doc_sums + alpha)


def estimate_phi(corpus: Corpus, state: MessageState, beta: float, cache=None) -> np.ndarray:
    """Topic-word distributions, shape (K, W); each row sums to one."""
    if cache is None:
        cache = rebuild_cache(corpus, state)
    return normalize_k(cache.word_sums.T + beta)

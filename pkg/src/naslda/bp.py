"""Unsupervised LDA message update as two neighborhood aggregations.

All functions take an array ``idx`` of corpus entry indices and return one
row per entry, so a full Jacobi sweep is a single call with
``idx = arange(nnz)``.  Reads come from ``state``/``cache`` (buffer t);
callers write results to a separate buffer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .messages import UNDERFLOW_FLOOR, normalize_k, rebuild_cache


@dataclass(frozen=True)
class LdaHyperParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")

    @property
    def degenerate(self) -> bool:
        return self.alpha == 0 and self.beta == 0

    @classmethod
    def default(cls, K):
        return cls(alpha=50.0 / K, beta=0.01)


def own_contribution(idx, corpus, state):
    return corpus.counts[idx][:, None] * state.messages[idx]


def agg_doc(idx, cache, state, corpus, alpha):
    """Sum of x*mu over the other words of the same document, plus alpha."""
    own = own_contribution(idx, corpus, state)
    return np.maximum(cache.doc_sums[corpus.docs[idx]] - own + alpha, 0.0)


def agg_word(idx, cache, state, corpus, beta):
    """Sum of x*mu over the same word in other documents, plus beta."""
    own = own_contribution(idx, corpus, state)
    return np.maximum(cache.word_sums[corpus.words[idx]] - own + beta, 0.0)


def na_doc(agg):
    return normalize_k(agg)


def word_denominators(idx, cache, corpus, beta):
    """Per-topic sum over all words of the document-excluded word aggregates.

    Removing document d from every word's sum removes d's total mass once,
    so the denominator is topic_totals - doc_sums[d] + W*beta.
    """
    d = corpus.docs[idx]
    return np.maximum(cache.topic_totals - cache.doc_sums[d] + corpus.num_words * beta, 0.0)


def na_word(agg, denom):
    """Componentwise agg / denom.

    A zero denominator gives a zero component; rows whose denominators are
    all zero become uniform.
    """
    agg = np.asarray(agg, dtype=np.float64)
    denom = np.asarray(denom, dtype=np.float64)
    zero = denom <= UNDERFLOW_FLOOR
    out = np.where(zero, 0.0, agg / np.where(zero, 1.0, denom))
    all_zero = zero.all(axis=-1, keepdims=True)
    if all_zero.any():
        out = np.where(all_zero, 1.0 / agg.shape[-1], out)
    return out


def unsupervised_factors(idx, cache, state, corpus, hyper: LdaHyperParams):
    """(NA_d, NA_w) for entries ``idx``."""
    nd = na_doc(agg_doc(idx, cache, state, corpus, hyper.alpha))
    nw = na_word(
        agg_word(idx, cache, state, corpus, hyper.beta),
        word_denominators(idx, cache, corpus, hyper.beta),
    )
    return nd, nw


def update_pair_unsupervised(idx, cache, state, corpus, hyper: LdaHyperParams):
    nd, nw = unsupervised_factors(idx, cache, state, corpus, hyper)
    return normalize_k(nd * nw)


def sweep_unsupervised(corpus, state, hyper, cache=None):
    """One Jacobi sweep over every entry; returns the new message array."""
    if cache is None:
        cache = rebuild_cache(corpus, state)
    idx = np.arange(corpus.nnz)
    return update_pair_unsupervised(idx, cache, state, corpus, hyper)

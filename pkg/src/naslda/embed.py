"""Word-embedding node attributes folded into the message update."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .messages import normalize_k
from .supervised import supervised_factors


@dataclass
class EmbedParams:
    """``wc`` maps an E-dim word vector to K topic pre-activations."""

    wc: np.ndarray

    def __post_init__(self):
        self.wc = np.asarray(self.wc, dtype=np.float64)
        if self.wc.ndim != 2:
            raise ValueError("wc must be a K x E matrix")

    @classmethod
    def init(cls, K, E, seed, scale=0.05):
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-scale, scale, size=(K, E)))


@dataclass
class UTable:
    """Per-vocabulary-word topic factors.

    ``u`` is (W, K).  ``neutral`` marks rows with all components equal
    (including words without vectors); multiplying by them is skipped since
    a constant factor cancels under normalization.
    """

    u: np.ndarray
    neutral: np.ndarray
    pre: np.ndarray
    act: np.ndarray


def build_u_table(vectors, has_vector, wc) -> UTable:
    """u_w = Norm_K(sigmoid(wc @ v_w)); uniform for words without a vector."""
    K = wc.shape[0]
    pre = vectors @ wc.T
    act = expit(pre)
    u = normalize_k(act)
    u[~has_vector] = 1.0 / K
    neutral = (u.max(axis=1) == u.min(axis=1)) | ~has_vector
    return UTable(u, neutral, pre, act)


def uniform_u_table(W, K) -> UTable:
    return UTable(np.full((W, K), 1.0 / K), np.ones(W, dtype=bool), np.zeros((W, K)), np.full((W, K), 0.5))


def embed_factor(word, table, params: EmbedParams):
    """u for one vocabulary word index."""
    K = params.wc.shape[0]
    row = table.index_map[word]
    if row < 0:
        return np.full(K, 1.0 / K)
    return normalize_k(expit(params.wc @ table.vectors[row]))


def full_factors(idx, cache, state, corpus, hyper, labels, sup_params, utab: UTable,
                 labeled=None, neighborhood=None, mix_target="doc"):
    f = supervised_factors(idx, cache, state, corpus, hyper, labels, sup_params, labeled,
                           neighborhood, mix_target)
    w = corpus.words[idx]
    u = utab.u[w]
    neutral = utab.neutral[w][:, None]
    f["u"] = u
    f["prod"] = np.where(neutral, f["base"], u * f["base"])
    return f


def update_pair_full(idx, cache, state, corpus, hyper, labels, sup_params, utab: UTable,
                     labeled=None, neighborhood=None, mix_target="doc"):
    f = full_factors(idx, cache, state, corpus, hyper, labels, sup_params, utab, labeled,
                     neighborhood, mix_target)
    return normalize_k(f["prod"])

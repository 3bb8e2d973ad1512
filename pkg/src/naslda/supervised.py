"""Label edges: documents sharing a label exchange topic mass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bp import LdaHyperParams, unsupervised_factors
from .corpus_io import LabelSet
from .messages import normalize_k


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


@dataclass
class SupervisedParams:
    """``ws_raw`` parameterizes the positive diagonal W_s = softplus(ws_raw)."""

    ws_raw: np.ndarray
    eta: float = 0.1
    epsilon: float = 0.5

    def __post_init__(self):
        self.ws_raw = np.asarray(self.ws_raw, dtype=np.float64)
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def identity(cls, K, eta=0.1, epsilon=0.5):
        return cls(np.full(K, float(softplus_inv(1.0))), eta, epsilon)

    @property
    def ws(self):
        return softplus(self.ws_raw)


class RegressionNeighborhood:
    """Sums of doc_sums over documents whose label lies within epsilon.

    Documents are grouped by distinct label value and sorted once; each query
    is two binary searches over group prefix sums.  A ball holding a single
    group returns that group's sum directly, so integer labels with
    epsilon <= 0.5 reproduce the classification sums exactly.
    """

    def __init__(self, doc_sums, values, epsilon):
        self.epsilon = float(epsilon)
        self.levels, group = np.unique(np.asarray(values, dtype=np.float64), return_inverse=True)
        self.group = group.ravel()
        self.group_sums = np.zeros((len(self.levels), doc_sums.shape[1]))
        np.add.at(self.group_sums, self.group, doc_sums)
        self.prefix = np.vstack([np.zeros((1, doc_sums.shape[1])), np.cumsum(self.group_sums, axis=0)])

    def ball_sums(self, doc_ids):
        g = self.group[doc_ids]
        centre = self.levels[g]
        lo = np.searchsorted(self.levels, centre - self.epsilon, side="right")
        hi = np.searchsorted(self.levels, centre + self.epsilon, side="left")
        out = self.prefix[hi] - self.prefix[lo]
        single = (hi - lo) == 1
        out[single] = self.group_sums[g[single]]
        return out


def agg_super(idx, cache, corpus, labels: LabelSet, params: SupervisedParams, neighborhood=None):
    """Topic mass of the other documents sharing the label of each entry's document."""
    d = corpus.docs[idx]
    if labels.is_classification:
        if cache.label_sums is None:
            raise ValueError("cache has no label sums; rebuild it with labels")
        total = cache.label_sums[labels.values[d]]
    else:
        if neighborhood is None:
            neighborhood = RegressionNeighborhood(cache.doc_sums, labels.values, params.epsilon)
        total = neighborhood.ball_sums(d)
    return np.maximum(total - cache.doc_sums[d], 0.0)


def na_super(agg, ws_raw):
    return normalize_k(softplus(np.asarray(ws_raw)) * agg)


def mix_doc_signal(na_s, na_d, eta):
    """eta * na_s + (1 - eta) * na_d; eta may be per-row (shape (n, 1))."""
    eta = np.asarray(eta, dtype=np.float64)
    mixed = eta * na_s + (1.0 - eta) * na_d
    return np.where(eta == 0, na_d, np.where(eta == 1, na_s, mixed))


def supervised_factors(idx, cache, state, corpus, hyper, labels, params, labeled=None,
                       neighborhood=None, mix_target="doc"):
    """Intermediates of the supervised update for entries ``idx``.

    Returns a dict with nd, nw, agg_s, ns, eta (per row), mix and base,
    where ``base`` is the product fed to the final normalization.
    ``labeled`` masks documents that have labels; others get eta = 0.
    """
    nd, nw = unsupervised_factors(idx, cache, state, corpus, hyper)
    d = corpus.docs[idx]
    eta = np.full((len(idx), 1), float(params.eta))
    if labeled is not None:
        eta[~labeled[d]] = 0.0
    out = dict(nd=nd, nw=nw, eta=eta)
    if labels is None or params.eta == 0:
        ns = np.full_like(nd, 1.0 / nd.shape[1])
        agg_s = np.zeros_like(nd)
        eta[:] = 0.0
    else:
        agg_s = agg_super(idx, cache, corpus, labels, params, neighborhood)
        ns = na_super(agg_s, params.ws_raw)
    other = nd if mix_target == "doc" else nw
    keep = nw if mix_target == "doc" else nd
    mix = mix_doc_signal(ns, other, eta)
    out.update(agg_s=agg_s, ns=ns, mix=mix, keep=keep, base=mix * keep)
    return out


def update_pair_supervised(idx, cache, state, corpus, hyper: LdaHyperParams, labels, params,
                           labeled=None, neighborhood=None, mix_target="doc"):
    f = supervised_factors(idx, cache, state, corpus, hyper, labels, params, labeled,
                           neighborhood, mix_target)
    return normalize_k(f["base"])

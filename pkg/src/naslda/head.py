"""Two-hidden-layer sigmoid head on document topic proportions.

score = S_C sig(S_B sig(S_A f + T_A) + T_B) + T_C, followed by a softmax for
classification or used directly as a scalar for regression.  Gradients are
derived by hand; batches are rows.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit, log_softmax, softmax

from .messages import normalize_k

PARAM_NAMES = ("s_a", "t_a", "s_b", "t_b", "s_c", "t_c")


@dataclass
class HeadParams:
    s_a: np.ndarray
    t_a: np.ndarray
    s_b: np.ndarray
    t_b: np.ndarray
    s_c: np.ndarray
    t_c: np.ndarray
    dropout_p: float = 0.5

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        H1, K = self.s_a.shape
        H2 = self.s_b.shape[0]
        if self.t_a.shape != (H1,) or self.s_b.shape != (H2, H1) or self.t_b.shape != (H2,):
            raise ValueError("head shapes do not chain K -> H1 -> H2")
        if self.s_c.shape[1] != H2 or self.t_c.shape != (self.s_c.shape[0],):
            raise ValueError("output layer does not match H2")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")

    @classmethod
    def init(cls, K, H1, H2, S, seed, dropout_p=0.5):
        """Glorot-uniform weights, zero biases.  S=1 gives a regression head."""
        rng = np.random.default_rng(seed)

        def glorot(n_out, n_in):
            lim = np.sqrt(6.0 / (n_in + n_out))
            return rng.uniform(-lim, lim, size=(n_out, n_in))

        return cls(glorot(H1, K), np.zeros(H1), glorot(H2, H1), np.zeros(H2),
                   glorot(S, H2), np.zeros(S), dropout_p)

    @property
    def num_outputs(self):
        return self.s_c.shape[0]

    def arrays(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self):
        return HeadParams(**{f.name: np.copy(getattr(self, f.name)) for f in fields(self)})


def doc_feature(doc_sums, alpha):
    """theta_d = Norm_K(doc_sums[d] + alpha), one row per document."""
    return normalize_k(np.asarray(doc_sums) + alpha)


def dropout_masks(rng, n, params: HeadParams):
    """Inverted-dropout masks for both hidden layers, or None when p == 0."""
    p = params.dropout_p
    if p == 0:
        return None
    keep = 1.0 - p
    m1 = (rng.random((n, params.s_a.shape[0])) < keep) / keep
    m2 = (rng.random((n, params.s_b.shape[0])) < keep) / keep
    return m1, m2


def _forward(features, params: HeadParams, masks=None):
    F = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if F.shape[1] != params.s_a.shape[1]:
        raise ValueError(f"feature length {F.shape[1]} != K={params.s_a.shape[1]}")
    h1 = expit(F @ params.s_a.T + params.t_a)
    a1 = h1 if masks is None else h1 * masks[0]
    h2 = expit(a1 @ params.s_b.T + params.t_b)
    a2 = h2 if masks is None else h2 * masks[1]
    scores = a2 @ params.s_c.T + params.t_c
    return scores, (F, h1, a1, h2, a2)


def forward(features, params: HeadParams, dropout_mask=None):
    """Return (scores, probabilities) for a batch of features."""
    scores, _ = _forward(features, params, dropout_mask)
    return scores, softmax(scores, axis=1)


def _backward(dscores, params: HeadParams, cache, masks):
    F, h1, a1, h2, a2 = cache
    grads = {"s_c": dscores.T @ a2, "t_c": dscores.sum(axis=0)}
    da2 = dscores @ params.s_c
    dh2 = da2 if masks is None else da2 * masks[1]
    dz2 = dh2 * h2 * (1.0 - h2)
    grads["s_b"] = dz2.T @ a1
    grads["t_b"] = dz2.sum(axis=0)
    da1 = dz2 @ params.s_b
    dh1 = da1 if masks is None else da1 * masks[0]
    dz1 = dh1 * h1 * (1.0 - h1)
    grads["s_a"] = dz1.T @ F
    grads["t_a"] = dz1.sum(axis=0)
    dfeat = dz1 @ params.s_a
    return grads, dfeat


def loss_and_grads_classification(features, targets, params: HeadParams, masks=None):
    """Mean cross-entropy over the batch.

    ``targets`` are 0-based class indices.  Returns (loss, grads, dfeatures,
    probabilities).
    """
    targets = np.asarray(targets, dtype=np.int64)
    n = len(targets)
    if n == 0:
        return 0.0, {k: np.zeros_like(v) for k, v in params.arrays().items()}, \
            np.zeros((0, params.s_a.shape[1])), np.zeros((0, params.num_outputs))
    scores, cache = _forward(features, params, masks)
    logp = log_softmax(scores, axis=1)
    loss = -logp[np.arange(n), targets].mean()
    probs = np.exp(logp)
    dscores = probs.copy()
    dscores[np.arange(n), targets] -= 1.0
    dscores /= n
    grads, dfeat = _backward(dscores, params, cache, masks)
    return float(loss), grads, dfeat, probs


def loss_and_grads_regression(features, targets, params: HeadParams, masks=None):
    """Sum of squared residuals.  Returns (loss, grads, dfeatures, scores)."""
    targets = np.asarray(targets, dtype=np.float64)
    if len(targets) == 0:
        return 0.0, {k: np.zeros_like(v) for k, v in params.arrays().items()}, \
            np.zeros((0, params.s_a.shape[1])), np.zeros((0, 1))
    scores, cache = _forward(features, params, masks)
    resid = targets - scores[:, 0]
    loss = float(np.sum(resid ** 2))
    dscores = (-2.0 * resid)[:, None]
    grads, dfeat = _backward(dscores, params, cache, masks)
    return loss, grads, dfeat, scores[:, 0]

"""Alternating message inference and minibatch SGD.

Each round samples corpus entries, updates their messages from the current
buffer (Jacobi), then takes one SGD step on the head, W_s and W_C.  W_s and
W_C see the loss through one unrolled message update of the sampled entries.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit, softmax

from .bp import LdaHyperParams, agg_doc, na_doc, na_word
from .corpus_io import Corpus, EmbeddingTable, LabelSet
from .embed import EmbedParams, UTable, build_u_table, full_factors, uniform_u_table
from .head import (
    PARAM_NAMES,
    HeadParams,
    _forward,
    doc_feature,
    dropout_masks,
    loss_and_grads_classification,
    loss_and_grads_regression,
)
from .messages import (
    UNDERFLOW_FLOOR,
    AggregateCache,
    MessageState,
    init_messages,
    normalize_k,
    rebuild_cache,
)
from .supervised import RegressionNeighborhood, SupervisedParams

logger = logging.getLogger(__name__)

LOG_COLUMNS = ("round", "mean_message_delta", "train_loss", "train_accuracy", "learning_rate", "wall_ms")


@dataclass
class TrainConfig:
    K: int = 10
    alpha: float | None = None
    beta: float = 0.01
    eta: float = 0.1
    epsilon: float = 0.5
    hidden: tuple = (50, 50)
    dropout_p: float = 0.5
    l2_ws_wc: float = 0.001
    learning_rate: float = 0.05
    lr_patience: int = 20
    rounds: int = 200
    pairs_per_round: int = 5000
    convergence_tol: float = 1e-4
    seed: int = 0
    mix_target: str = "doc"
    grad_path: str = "unroll1"
    use_embeddings: bool = True
    heldout_sweeps: int = 50

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("topics must be >= 1")
        if self.pairs_per_round < 1:
            raise ValueError("pairs_per_round must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.mix_target not in ("doc", "word"):
            raise ValueError("mix_target must be 'doc' or 'word'")
        if self.grad_path not in ("unroll1", "none"):
            raise ValueError("grad_path must be 'unroll1' or 'none'")
        if self.alpha is None:
            self.alpha = 50.0 / self.K
        self.hidden = tuple(int(h) for h in self.hidden)

    @property
    def hyper(self):
        return LdaHyperParams(self.alpha, self.beta)

    def as_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class ModelParams:
    """Everything needed to classify new documents."""

    K: int
    alpha: float
    beta: float
    sup: SupervisedParams
    emb: EmbedParams | None
    head: HeadParams | None
    vocabulary: tuple
    word_sums: np.ndarray
    label_kind: str | None = None
    mix_target: str = "doc"

    @property
    def hyper(self):
        return LdaHyperParams(self.alpha, self.beta)


@dataclass
class TrainResult:
    model: ModelParams
    state: MessageState
    log: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# backward helpers


def normalize_backward(grad_out, out, total):
    """Gradient through y = x / sum(x) given y and sum(x); zero where sum is 0."""
    inner = np.sum(grad_out * out, axis=-1, keepdims=True)
    safe = np.where(total > UNDERFLOW_FLOOR, total, 1.0)
    return np.where(total > UNDERFLOW_FLOOR, (grad_out - inner) / safe, 0.0)


def unrolled_param_grads(f, grad_mu, corpus, idx, sup: SupervisedParams, emb, vectors, has_vector):
    """d loss / d (ws_raw, wc) through one message update.

    ``f`` holds the forward intermediates from :func:`full_factors` and
    ``grad_mu`` the loss gradient w.r.t. the new messages of entries ``idx``.
    """
    u, base = f["u"], f["base"]
    p = u * base
    p_sum = p.sum(axis=1, keepdims=True)
    g_p = normalize_backward(grad_mu, p / np.where(p_sum > 0, p_sum, 1.0), p_sum)
    g_u = g_p * base
    g_mix = g_p * u * f["keep"]
    g_ns = f["eta"] * g_mix

    K = u.shape[1]
    g_ws_raw = np.zeros(K)
    if np.any(f["eta"] > 0):
        ws = np.logaddexp(0.0, sup.ws_raw)
        q = ws * f["agg_s"]
        q_sum = q.sum(axis=1, keepdims=True)
        g_q = normalize_backward(g_ns, f["ns"], q_sum)
        g_ws_raw = np.sum(g_q * f["agg_s"], axis=0) * expit(sup.ws_raw)

    g_wc = None
    if emb is not None:
        W = has_vector.shape[0]
        g_u_word = np.zeros((W, K))
        np.add.at(g_u_word, corpus.words[idx], g_u)
        act = expit(vectors @ emb.wc.T)
        act_sum = act.sum(axis=1, keepdims=True)
        u_word = act / act_sum
        g_act = normalize_backward(g_u_word, u_word, act_sum)
        g_pre = g_act * act * (1.0 - act)
        g_pre[~has_vector] = 0.0
        g_wc = g_pre.T @ vectors
    return g_ws_raw, g_wc


@dataclass
class RoundGrads:
    loss: float
    accuracy: float
    head_grads: dict
    g_ws_raw: np.ndarray
    g_wc: np.ndarray | None
    batch: np.ndarray


def unrolled_loss_and_grads(corpus, labels, cache, idx, f, new, old, alpha, sup, emb,
                            vectors, has_vector, head, masks=None, with_param_grads=True):
    """Loss of the documents touched by ``idx`` after their messages move
    from ``old`` to ``new``, with gradients for every parameter.

    The read buffer (``cache``, ``old``) is held constant, so W_s and W_C
    receive gradient only through ``new``.
    """
    x = corpus.counts[idx][:, None]
    batch, local = np.unique(corpus.docs[idx], return_inverse=True)
    doc_sums = cache.doc_sums[batch].copy()
    np.add.at(doc_sums, local, x * new - x * old)
    s = np.maximum(doc_sums, 0.0) + alpha
    s_sum = s.sum(axis=1, keepdims=True)
    feats = normalize_k(s)
    targets = labels.values[batch]
    if labels.is_classification:
        loss, grads, dfeat, _ = loss_and_grads_classification(feats, targets, head, masks)
        scores, _ = _forward(feats, head)
        acc = float(np.mean(np.argmax(scores, axis=1) == targets)) if len(batch) else np.nan
    else:
        loss, grads, dfeat, _ = loss_and_grads_regression(feats, targets, head, masks)
        acc = np.nan
    g_ws = np.zeros_like(sup.ws_raw)
    g_wc = None
    if with_param_grads and len(idx):
        g_s = normalize_backward(dfeat, feats, s_sum)
        grad_mu = x * g_s[local]
        g_ws, g_wc = unrolled_param_grads(f, grad_mu, corpus, idx, sup, emb, vectors, has_vector)
    return RoundGrads(loss, acc, grads, g_ws, g_wc, batch)


# ---------------------------------------------------------------------------


class Trainer:
    """Holds the mutable training state; :func:`train` is the entry point."""

    def __init__(self, corpus: Corpus, labels: LabelSet | None, table: EmbeddingTable | None,
                 config: TrainConfig):
        self.corpus = corpus
        self.labels = labels
        self.config = config
        K = config.K
        seeds = np.random.SeedSequence(config.seed).spawn(5)
        self.rng = np.random.default_rng(seeds[0])
        self.state = init_messages(corpus, K, int(seeds[1].generate_state(1)[0]))
        eta = config.eta if labels is not None else 0.0
        self.sup = SupervisedParams.identity(K, eta=eta, epsilon=config.epsilon)
        self.use_embeddings = table is not None and config.use_embeddings
        if self.use_embeddings:
            table = table.for_vocabulary(corpus.vocabulary) if table.index_map.size != corpus.num_words else table
            self.vectors, self.has_vector = table.vocab_matrix()
            self.emb = EmbedParams.init(K, table.dim, int(seeds[2].generate_state(1)[0]))
        else:
            self.vectors, self.has_vector = None, None
            self.emb = None
        self.head = None
        if labels is not None:
            S = labels.num_classes if labels.is_classification else 1
            H1, H2 = config.hidden
            self.head = HeadParams.init(K, H1, H2, S, int(seeds[3].generate_state(1)[0]),
                                        config.dropout_p)
        self.dropout_rng = np.random.default_rng(seeds[4])
        self.lr = config.learning_rate
        self.best_loss = np.inf
        self.since_best = 0
        self.round = 0

    def u_table(self) -> UTable:
        if self.emb is None:
            return uniform_u_table(self.corpus.num_words, self.config.K)
        return build_u_table(self.vectors, self.has_vector, self.emb.wc)

    def sample(self):
        n = self.corpus.nnz
        size = min(self.config.pairs_per_round, n)
        return np.sort(self.rng.choice(n, size=size, replace=False))

    def step(self):
        """One round: message inference on sampled entries, then one SGD step."""
        cfg, corpus, labels = self.config, self.corpus, self.labels
        t0 = time.perf_counter()
        cache = rebuild_cache(corpus, self.state, labels)
        neighborhood = None
        if labels is not None and not labels.is_classification and self.sup.eta > 0:
            neighborhood = RegressionNeighborhood(cache.doc_sums, labels.values, self.sup.epsilon)
        idx = self.sample()
        utab = self.u_table()
        f = full_factors(idx, cache, self.state, corpus, cfg.hyper, labels, self.sup, utab,
                         neighborhood=neighborhood, mix_target=cfg.mix_target)
        new = normalize_k(f["prod"])
        old = self.state.messages[idx]
        delta = float(np.abs(new - old).sum(axis=1).mean()) if len(idx) else 0.0

        loss, acc = np.nan, np.nan
        if self.head is not None:
            loss, acc = self._sgd(idx, f, new, old, cache)

        messages = self.state.messages.copy()
        messages[idx] = new
        self.state = MessageState(messages, self.state.iteration + 1)
        self.round += 1
        row = dict(round=self.round, mean_message_delta=delta, train_loss=loss,
                   train_accuracy=acc, learning_rate=self.lr,
                   wall_ms=(time.perf_counter() - t0) * 1000.0)
        return row

    def _sgd(self, idx, f, new, old, cache: AggregateCache):
        masks = None
        if self.head.dropout_p > 0:
            n_docs = len(np.unique(self.corpus.docs[idx]))
            masks = dropout_masks(self.dropout_rng, n_docs, self.head)
        out = unrolled_loss_and_grads(
            self.corpus, self.labels, cache, idx, f, new, old, self.config.alpha, self.sup,
            self.emb, self.vectors, self.has_vector, self.head, masks,
            with_param_grads=self.config.grad_path == "unroll1",
        )
        self.apply_sgd(out.head_grads, out.g_ws_raw, out.g_wc)
        self._plateau(out.loss)
        return out.loss, out.accuracy

    def apply_sgd(self, head_grads, g_ws, g_wc):
        """Plain SGD with L2 (2 * lambda * param) on ws_raw and wc."""
        lr, lam = self.lr, self.config.l2_ws_wc
        for name in PARAM_NAMES:
            setattr(self.head, name, getattr(self.head, name) - lr * head_grads[name])
        self.sup.ws_raw = self.sup.ws_raw - lr * (g_ws + 2.0 * lam * self.sup.ws_raw)
        if self.emb is not None:
            g = g_wc if g_wc is not None else 0.0
            self.emb.wc = self.emb.wc - lr * (g + 2.0 * lam * self.emb.wc)

    def _plateau(self, loss):
        if not np.isfinite(loss):
            return
        if loss < self.best_loss:
            self.best_loss = loss
            self.since_best = 0
            return
        self.since_best += 1
        if self.since_best >= self.config.lr_patience:
            self.lr *= 0.5
            self.since_best = 0

    def model(self) -> ModelParams:
        cache = rebuild_cache(self.corpus, self.state)
        return ModelParams(
            K=self.config.K, alpha=self.config.alpha, beta=self.config.beta, sup=self.sup,
            emb=self.emb, head=self.head, vocabulary=self.corpus.vocabulary,
            word_sums=cache.word_sums,
            label_kind=None if self.labels is None else self.labels.kind,
            mix_target=self.config.mix_target,
        )


def train(corpus: Corpus, labels: LabelSet | None, table: EmbeddingTable | None,
          config: TrainConfig, callback=None) -> TrainResult:
    """Run up to ``config.rounds`` rounds; stops early once the mean L1
    message change of a round drops below ``config.convergence_tol``."""
    trainer = Trainer(corpus, labels, table, config)
    log = []
    for _ in range(config.rounds):
        row = trainer.step()
        log.append(row)
        if callback is not None:
            callback(row)
        if row["mean_message_delta"] < config.convergence_tol:
            logger.info("converged after %d rounds", row["round"])
            break
    return TrainResult(trainer.model(), trainer.state, log)


# ---------------------------------------------------------------------------
# held-out inference


def align_heldout(model: ModelParams, heldout: Corpus):
    """Map held-out words onto the training vocabulary, appending unseen ones.

    Returns (word index array per held-out entry, extended vocabulary).
    """
    index = {w: i for i, w in enumerate(model.vocabulary)}
    vocab = list(model.vocabulary)
    mapping = np.empty(heldout.num_words, dtype=np.int64)
    for j, w in enumerate(heldout.vocabulary):
        if w not in index:
            index[w] = len(vocab)
            vocab.append(w)
        mapping[j] = index[w]
    unseen = len(vocab) - len(model.vocabulary)
    if unseen:
        logger.warning("%d held-out words are not in the training vocabulary", unseen)
    return mapping[heldout.words], vocab


def infer_messages(model: ModelParams, heldout: Corpus, table: EmbeddingTable | None = None,
                   sweeps=50, tol=1e-4, seed=0, use_embeddings=True):
    """Jacobi sweeps on held-out documents with frozen parameters and eta = 0.

    The word factor uses the training topic-word mass, extended with zero
    rows for unseen words.  Returns (MessageState, doc_sums).
    """
    K = model.K
    words, vocab = align_heldout(model, heldout)
    W_ext = len(vocab)
    word_sums = np.zeros((W_ext, K))
    word_sums[: len(model.vocabulary)] = model.word_sums
    nw = na_word(word_sums[words] + model.beta,
                 np.broadcast_to(model.word_sums.sum(axis=0) + W_ext * model.beta, (len(words), K)))
    if use_embeddings and model.emb is not None and table is not None:
        vectors, has = table.for_vocabulary(vocab).vocab_matrix()
        utab = build_u_table(vectors, has, model.emb.wc)
    else:
        utab = uniform_u_table(W_ext, K)
    u = utab.u[words]
    neutral = utab.neutral[words][:, None]

    state = init_messages(heldout, K, seed)
    idx = np.arange(heldout.nnz)
    for _ in range(sweeps):
        cache = rebuild_cache(heldout, state)
        nd = na_doc(agg_doc(idx, cache, state, heldout, model.alpha))
        base = nd * nw
        new = normalize_k(np.where(neutral, base, u * base))
        delta = float(np.abs(new - state.messages).sum(axis=1).mean()) if heldout.nnz else 0.0
        state = MessageState(new, state.iteration + 1)
        if delta < tol:
            break
    return state, rebuild_cache(heldout, state).doc_sums


def predict(model: ModelParams, doc_sums):
    """Head output for document sums: class probabilities or regression scores."""
    feats = doc_feature(doc_sums, model.alpha)
    scores, _ = _forward(feats, model.head)
    if model.label_kind == "regression":
        return scores[:, 0]
    return softmax(scores, axis=1)


def infer_heldout(model: ModelParams, heldout: Corpus, table: EmbeddingTable | None = None,
                  sweeps=50, tol=1e-4, seed=0, use_embeddings=True):
    if model.head is None:
        raise ValueError("model has no output head (trained without labels)")
    _, doc_sums = infer_messages(model, heldout, table, sweeps, tol, seed, use_embeddings)
    return predict(model, doc_sums)

"""Seeded synthetic corpora drawn from the LDA generative process.

Labels follow the document topic proportions and every word gets an
embedding near the centroid of its dominant topic, so both the labels and
the embeddings are learnable from the data.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .corpus_io import (
    CLASSIFICATION,
    Corpus,
    EmbeddingTable,
    LabelSet,
    from_triples,
    write_corpus,
    write_embeddings,
    write_labels,
)


@dataclass(frozen=True)
class SynthSpec:
    D: int = 200
    W: int = 50
    K_true: int = 2
    S: int = 2
    doc_length: float = 30.0
    topic_sharpness: float = 0.05
    doc_alpha: float = 0.2
    label_rule: str = "argmax"
    embed_dim: int = 0
    embed_noise: float = 0.1
    embed_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("D", "W", "K_true", "S"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.topic_sharpness <= 0 or self.doc_alpha <= 0:
            raise ValueError("Dirichlet concentrations must be positive")
        if self.label_rule not in ("argmax", "threshold"):
            raise ValueError("label_rule must be 'argmax' or 'threshold'")

    @property
    def E(self):
        return self.embed_dim or self.K_true


PRESETS = {
    "two-topic": SynthSpec(D=200, W=50, K_true=2, S=2, doc_length=30, topic_sharpness=0.05),
    "three-topic": SynthSpec(D=400, W=60, K_true=3, S=3, doc_length=40, topic_sharpness=0.05),
}


@dataclass
class SynthData:
    corpus: Corpus
    labels: LabelSet
    table: EmbeddingTable
    theta: np.ndarray
    phi: np.ndarray
    spec: SynthSpec


def topic_centroids(K, E, rng):
    if E >= K:
        return np.eye(K, E)
    c = rng.normal(size=(K, E))
    return c / np.linalg.norm(c, axis=1, keepdims=True)


def generate(spec: SynthSpec) -> SynthData:
    rng = np.random.default_rng(spec.seed)
    K, W, D = spec.K_true, spec.W, spec.D
    phi = rng.dirichlet(np.full(W, spec.topic_sharpness), size=K)
    theta = rng.dirichlet(np.full(K, spec.doc_alpha), size=D)
    lengths = np.maximum(rng.poisson(spec.doc_length, size=D), 1)
    word_probs = theta @ phi
    X = np.vstack([rng.multinomial(n, p / p.sum()) for n, p in zip(lengths, word_probs)])
    docs, words = np.nonzero(X)
    vocab = [f"w{i:04d}" for i in range(W)]
    corpus = from_triples(D, W, docs, words, X[docs, words], vocab)

    if spec.label_rule == "argmax":
        values = np.argmax(theta, axis=1) % spec.S
    else:
        values = (theta[:, 0] > 0.5).astype(np.int64)
    labels = LabelSet(CLASSIFICATION, values, max(spec.S, 2))

    centroids = topic_centroids(K, spec.E, rng)
    dominant = np.argmax(phi, axis=0)
    jitter = spec.embed_noise * rng.normal(size=(W, spec.E))
    vectors = spec.embed_scale * (centroids[dominant] + jitter)
    table = EmbeddingTable(vocab, vectors).for_vocabulary(vocab)
    return SynthData(corpus, labels, table, theta, phi, spec)


def split_docs(data: SynthData, train_fraction=0.75):
    """(train, test) SynthData halves over the first/last documents."""
    n_train = int(round(train_fraction * data.corpus.num_docs))
    ids = np.arange(data.corpus.num_docs)
    parts = []
    for sel in (ids[:n_train], ids[n_train:]):
        parts.append(SynthData(data.corpus.subset_docs(sel), data.labels.subset(sel), data.table,
                               data.theta[sel], data.phi, data.spec))
    return parts[0], parts[1]


def drop_words(corpus: Corpus, drop) -> Corpus:
    """Remove vocabulary words ``drop`` (and their tokens); reindex the rest."""
    keep = np.setdiff1d(np.arange(corpus.num_words), np.asarray(drop, dtype=np.int64))
    remap = np.full(corpus.num_words, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    sel = remap[corpus.words] >= 0
    vocab = [corpus.vocabulary[i] for i in keep]
    return from_triples(corpus.num_docs, len(keep), corpus.docs[sel], remap[corpus.words[sel]],
                        corpus.counts[sel], vocab)


def unseen_word_split(data: SynthData):
    """Words to hide from training so about half of each topic's mass is unseen.

    Within each topic, words are taken in decreasing probability and each one
    joins whichever side (hidden or kept) currently holds less mass.  Held-out
    documents drawn from the same topics then have roughly half their tokens
    outside the training vocabulary.
    """
    dominant = np.argmax(data.phi, axis=0)
    hidden = []
    for k in range(data.phi.shape[0]):
        members = np.flatnonzero(dominant == k)
        members = members[np.argsort(-data.phi[k, members], kind="stable")]
        mass_hidden = mass_kept = 0.0
        for w in members:
            if mass_hidden <= mass_kept:
                hidden.append(int(w))
                mass_hidden += data.phi[k, w]
            else:
                mass_kept += data.phi[k, w]
    return np.sort(np.array(hidden, dtype=np.int64))


def write_synth(data: SynthData, out_dir, prefix="train"):
    """Write corpus, vocabulary, labels and embeddings under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "corpus": os.path.join(out_dir, f"{prefix}.bow"),
        "vocab": os.path.join(out_dir, f"{prefix}.vocab"),
        "labels": os.path.join(out_dir, f"{prefix}.labels"),
        "embeddings": os.path.join(out_dir, "embeddings.txt"),
    }
    write_corpus(data.corpus, paths["corpus"], paths["vocab"])
    write_labels(data.labels, paths["labels"])
    write_embeddings(data.table, paths["embeddings"])
    return paths


def sample_documents(data: SynthData, D, doc_length, seed) -> SynthData:
    """Fresh documents from the same topics (labels and embeddings reused)."""
    spec = data.spec
    rng = np.random.default_rng(seed)
    K, W = data.phi.shape
    theta = rng.dirichlet(np.full(K, spec.doc_alpha), size=D)
    lengths = np.maximum(rng.poisson(doc_length, size=D), 1)
    word_probs = theta @ data.phi
    X = np.vstack([rng.multinomial(n, p / p.sum()) for n, p in zip(lengths, word_probs)])
    docs, words = np.nonzero(X)
    corpus = from_triples(D, W, docs, words, X[docs, words], data.corpus.vocabulary)
    if spec.label_rule == "argmax":
        values = np.argmax(theta, axis=1) % spec.S
    else:
        values = (theta[:, 0] > 0.5).astype(np.int64)
    labels = LabelSet(CLASSIFICATION, values, max(spec.S, 2))
    return SynthData(corpus, labels, data.table, theta, data.phi, spec)

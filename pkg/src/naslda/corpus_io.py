"""Readers and writers for bag-of-words corpora, labels and word embeddings.

On disk everything is 1-based (UCI convention); in memory everything is
0-based.  Conversion happens here and nowhere else.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

CLASSIFICATION = "classification"
REGRESSION = "regression"


class CorpusFormatError(ValueError):
    """Raised when an input file violates its on-disk format."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if line is not None:
            where = f" at line {line}"
        if path is not None:
            where += f" ({path})"
        super().__init__(message + where)


@dataclass(frozen=True)
class Corpus:
    """Sparse document-word count matrix.

    ``docs``, ``words`` and ``counts`` are parallel arrays of length NNZ,
    sorted by (doc, word).  Indices are 0-based.
    """

    num_docs: int
    num_words: int
    docs: np.ndarray
    words: np.ndarray
    counts: np.ndarray
    vocabulary: tuple

    def __post_init__(self):
        for name in ("docs", "words", "counts"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "vocabulary", tuple(self.vocabulary))

    @property
    def nnz(self) -> int:
        return int(self.docs.shape[0])

    @property
    def doc_lengths(self) -> np.ndarray:
        return np.bincount(self.docs, weights=self.counts, minlength=self.num_docs).astype(np.int64)

    @property
    def entries(self):
        """List of (doc, word, count) triples, 0-based."""
        return list(zip(self.docs.tolist(), self.words.tolist(), self.counts.tolist()))

    def dense(self) -> np.ndarray:
        X = np.zeros((self.num_docs, self.num_words), dtype=np.int64)
        X[self.docs, self.words] = self.counts
        return X

    def subset_docs(self, doc_ids) -> "Corpus":
        """Corpus restricted to ``doc_ids`` (renumbered in the given order)."""
        doc_ids = np.asarray(doc_ids, dtype=np.int64)
        remap = np.full(self.num_docs, -1, dtype=np.int64)
        remap[doc_ids] = np.arange(len(doc_ids))
        keep = remap[self.docs] >= 0
        return from_triples(
            len(doc_ids), self.num_words, remap[self.docs[keep]], self.words[keep],
            self.counts[keep], self.vocabulary,
        )

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return (
            self.num_docs == other.num_docs
            and self.num_words == other.num_words
            and self.vocabulary == other.vocabulary
            and np.array_equal(self.docs, other.docs)
            and np.array_equal(self.words, other.words)
            and np.array_equal(self.counts, other.counts)
        )

    __hash__ = None


def from_triples(num_docs, num_words, docs, words, counts, vocabulary=None) -> Corpus:
    """Build a validated, canonically sorted Corpus from 0-based triples."""
    docs = np.asarray(docs, dtype=np.int64)
    words = np.asarray(words, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.int64)
    if vocabulary is None:
        vocabulary = [f"w{i}" for i in range(num_words)]
    if len(vocabulary) != num_words:
        raise ValueError(f"vocabulary has {len(vocabulary)} words, expected {num_words}")
    if len(set(vocabulary)) != num_words or any(not v for v in vocabulary):
        raise ValueError("vocabulary words must be distinct and non-empty")
    if docs.size:
        if docs.min() < 0 or docs.max() >= num_docs:
            raise ValueError("document index out of range")
        if words.min() < 0 or words.max() >= num_words:
            raise ValueError("word index out of range")
        if counts.min() < 1:
            raise ValueError("counts must be >= 1")
    order = np.lexsort((words, docs))
    docs, words, counts = docs[order], words[order], counts[order]
    if docs.size > 1:
        dup = (np.diff(docs) == 0) & (np.diff(words) == 0)
        if dup.any():
            i = int(np.flatnonzero(dup)[0])
            raise ValueError(f"duplicate entry (d={docs[i] + 1}, w={words[i] + 1})")
    return Corpus(num_docs, num_words, docs, words, counts, vocabulary)


def _data_lines(path):
    with open(path, "r", encoding="utf-8", newline=None) as f:
        for lineno, raw in enumerate(f, start=1):
            yield lineno, raw.rstrip("\r\n")


def load_vocab(path) -> list:
    return [line.strip() for _, line in _data_lines(path)]


def load_corpus(bow_path, vocab_path=None) -> Corpus:
    """Read a UCI bag-of-words file (D, W, NNZ header then "d w count" lines).

    Without ``vocab_path`` placeholder words ``w0..w{W-1}`` are used.
    """
    header = []
    docs, words, counts, linenos = [], [], [], []
    seen = {}
    D = W = nnz = None
    for lineno, line in _data_lines(bow_path):
        if len(header) < 3:
            try:
                value = int(line.strip())
            except ValueError:
                raise CorpusFormatError("malformed header", bow_path, lineno) from None
            if value < 0:
                raise CorpusFormatError("malformed header", bow_path, lineno)
            header.append(value)
            if len(header) == 3:
                D, W, nnz = header
            continue
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise CorpusFormatError("malformed entry", bow_path, lineno)
        try:
            d, w, c = (int(p) for p in parts)
        except ValueError:
            raise CorpusFormatError("malformed entry", bow_path, lineno) from None
        if not 1 <= d <= D:
            raise CorpusFormatError("document index out of range", bow_path, lineno)
        if not 1 <= w <= W:
            raise CorpusFormatError("word index out of range", bow_path, lineno)
        if c < 1:
            raise CorpusFormatError("count must be positive", bow_path, lineno)
        if (d, w) in seen:
            raise CorpusFormatError(
                f"duplicate entry (d={d}, w={w}), first seen at line {seen[(d, w)]}",
                bow_path, lineno,
            )
        seen[(d, w)] = lineno
        docs.append(d - 1)
        words.append(w - 1)
        counts.append(c)
        linenos.append(lineno)
    if len(header) < 3:
        raise CorpusFormatError("malformed header", bow_path, len(header) + 1)
    if len(docs) != nnz:
        raise CorpusFormatError(
            f"entry count mismatch: header says {nnz}, found {len(docs)}", bow_path
        )
    if vocab_path is not None:
        vocab = load_vocab(vocab_path)
        if len(vocab) != W:
            raise CorpusFormatError(
                f"vocabulary line count {len(vocab)} != W={W}", vocab_path, len(vocab)
            )
        seen_words = {}
        for i, v in enumerate(vocab, start=1):
            if not v:
                raise CorpusFormatError("empty vocabulary word", vocab_path, i)
            if v in seen_words:
                raise CorpusFormatError(f"duplicate vocabulary word {v!r}", vocab_path, i)
            seen_words[v] = i
    else:
        vocab = None
    return from_triples(D, W, docs, words, counts, vocab)


def write_corpus(corpus: Corpus, bow_path, vocab_path=None):
    with open(bow_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{corpus.num_docs}\n{corpus.num_words}\n{corpus.nnz}\n")
        for d, w, c in corpus.entries:
            f.write(f"{d + 1} {w + 1} {c}\n")
    if vocab_path is not None:
        with open(vocab_path, "w", encoding="utf-8", newline="\n") as f:
            for word in corpus.vocabulary:
                f.write(word + "\n")


@dataclass(frozen=True)
class LabelSet:
    """One label per document.

    Classification labels are stored 0-based (``values`` in 0..S-1).
    """

    kind: str
    values: np.ndarray
    num_classes: int = 0

    def __post_init__(self):
        if self.kind not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown label kind {self.kind!r}")
        dtype = np.int64 if self.kind == CLASSIFICATION else np.float64
        values = np.ascontiguousarray(self.values, dtype=dtype)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.kind == CLASSIFICATION:
            if self.num_classes < 2:
                raise ValueError("classification needs at least 2 classes")
            if values.size and (values.min() < 0 or values.max() >= self.num_classes):
                raise ValueError("class label out of range")

    def __len__(self):
        return int(self.values.shape[0])

    @property
    def is_classification(self) -> bool:
        return self.kind == CLASSIFICATION

    def subset(self, doc_ids) -> "LabelSet":
        return LabelSet(self.kind, self.values[np.asarray(doc_ids)], self.num_classes)


def load_labels(path, corpus: Corpus, kind=CLASSIFICATION) -> LabelSet:
    values = []
    for lineno, line in _data_lines(path):
        text = line.strip()
        if not text:
            continue
        try:
            if kind == CLASSIFICATION:
                v = int(text)
                if v < 1:
                    raise CorpusFormatError("class value must be >= 1", path, lineno)
                values.append(v - 1)
            else:
                values.append(float(text))
        except ValueError as exc:
            if isinstance(exc, CorpusFormatError):
                raise
            raise CorpusFormatError(f"non-numeric label {text!r}", path, lineno) from None
    if len(values) != corpus.num_docs:
        raise CorpusFormatError(
            f"label count mismatch: {len(values)} labels for {corpus.num_docs} documents", path
        )
    if kind == CLASSIFICATION:
        S = max(values) + 1 if values else 0
        return LabelSet(kind, values, max(S, 2))
    return LabelSet(kind, values)


def write_labels(labels: LabelSet, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for v in labels.values.tolist():
            f.write(f"{v + 1}\n" if labels.is_classification else f"{v!r}\n")


@dataclass(frozen=True)
class EmbeddingTable:
    """Pre-trained word vectors.

    ``words[i]`` owns row ``vectors[i]``.  ``index_map[w]`` is the row for
    vocabulary word ``w`` or -1 when the word has no vector.
    """

    words: tuple
    vectors: np.ndarray
    index_map: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(self.words):
            raise ValueError("vectors must be a (num_words, dim) matrix")
        index_map = np.asarray(self.index_map, dtype=np.int64)
        if index_map.size and index_map.max() >= vectors.shape[0]:
            raise ValueError("index_map references a missing row")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "index_map", index_map)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def coverage(self) -> float:
        if self.index_map.size == 0:
            return 0.0
        return float(np.mean(self.index_map >= 0))

    def rows_for(self, vocabulary) -> np.ndarray:
        lookup = {w: i for i, w in enumerate(self.words)}
        return np.array([lookup.get(w, -1) for w in vocabulary], dtype=np.int64)

    def for_vocabulary(self, vocabulary) -> "EmbeddingTable":
        """Same vectors, index_map rebuilt against another vocabulary."""
        return EmbeddingTable(self.words, self.vectors, self.rows_for(vocabulary))

    def vocab_matrix(self) -> tuple:
        """(vectors per vocabulary word, boolean has-vector mask)."""
        has = self.index_map >= 0
        V = np.zeros((self.index_map.shape[0], self.dim))
        V[has] = self.vectors[self.index_map[has]]
        return V, has


def load_embeddings(path, corpus: Corpus | None = None) -> EmbeddingTable:
    """Read word2vec text format; the optional "N E" header is detected."""
    words, rows = [], []
    dim = None
    for lineno, line in _data_lines(path):
        parts = line.split()
        if not parts:
            continue
        if lineno == 1 and len(parts) == 2:
            try:
                int(parts[0])
                dim = int(parts[1])
                continue
            except ValueError:
                pass
        word, comps = parts[0], parts[1:]
        if dim is None:
            dim = len(comps)
        if len(comps) != dim:
            raise CorpusFormatError(
                f"dimension mismatch: expected {dim} components, got {len(comps)}", path, lineno
            )
        try:
            rows.append([float(c) for c in comps])
        except ValueError:
            raise CorpusFormatError("non-numeric component", path, lineno) from None
        words.append(word)
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), dim or 0)
    table = EmbeddingTable(words, vectors)
    if corpus is not None:
        table = table.for_vocabulary(corpus.vocabulary)
        if table.coverage == 0.0:
            logger.warning("no vocabulary word has an embedding in %s", os.fspath(path))
        else:
            logger.info("embedding coverage %.3f of %d words", table.coverage, corpus.num_words)
    return table


def write_embeddings(table: EmbeddingTable, path, header=True):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if header:
            f.write(f"{len(table.words)} {table.dim}\n")
        for word, vec in zip(table.words, table.vectors):
            f.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def filter_min_embedded_words(corpus: Corpus, table: EmbeddingTable, min_words: int):
    """Doc ids with at least ``min_words`` embedded tokens."""
    has = table.index_map >= 0
    embedded = np.bincount(
        corpus.docs, weights=corpus.counts * has[corpus.words], minlength=corpus.num_docs
    )
    return np.flatnonzero(embedded >= min_words)

"""Model checkpoints, format v1.

Layout (all integers little-endian)::

    magic      8 bytes   b"NASLDA\\x00\\x01"
    version    uint32    1
    meta_len   uint32    length of the UTF-8 JSON metadata that follows
    meta       bytes     JSON: vocabulary, label_kind, mix_target, has_* flags
    count      uint32    number of tensors
    count x:
        name_len  uint32, name (UTF-8)
        ndim      uint32, then ndim x uint64 dims
        data      prod(dims) x float64 (little-endian, C order)

Scalars (K, alpha, beta, eta, epsilon, dropout_p) are 0-d tensors.
Tensors are written in sorted name order so identical models give
identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .embed import EmbedParams
from .head import PARAM_NAMES, HeadParams
from .messages import MessageState
from .supervised import SupervisedParams
from .trainer import ModelParams

MAGIC = b"NASLDA\x00\x01"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _tensors(model: ModelParams, state: MessageState | None):
    t = {
        "K": float(model.K),
        "alpha": model.alpha,
        "beta": model.beta,
        "eta": model.sup.eta,
        "epsilon": model.sup.epsilon,
        "ws_raw": model.sup.ws_raw,
        "word_sums": model.word_sums,
    }
    if model.emb is not None:
        t["wc"] = model.emb.wc
    if model.head is not None:
        t["dropout_p"] = model.head.dropout_p
        for name in PARAM_NAMES:
            t["head." + name] = getattr(model.head, name)
    if state is not None:
        t["messages"] = state.messages
    return {k: np.asarray(v, dtype="<f8") for k, v in t.items()}


def dumps(model: ModelParams, state: MessageState | None = None) -> bytes:
    meta = {
        "vocabulary": list(model.vocabulary),
        "label_kind": model.label_kind,
        "mix_target": model.mix_target,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, ensure_ascii=False).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(meta_bytes)), meta_bytes]
    tensors = _tensors(model, state)
    parts.append(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], order="C")  # keeps scalars 0-d
        nb = name.encode("utf-8")
        parts.append(struct.pack("<I", len(nb)) + nb)
        parts.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes(order="C"))
    return b"".join(parts)


def save(path, model: ModelParams, state: MessageState | None = None):
    with open(path, "wb") as f:
        f.write(dumps(model, state))


def loads(blob: bytes):
    """Return (ModelParams, MessageState or None)."""
    try:
        return _parse(blob)
    except (struct.error, UnicodeDecodeError, KeyError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc


def _parse(blob: bytes):
    if blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    pos = 8
    version, meta_len = struct.unpack_from("<II", blob, pos)
    pos += 8
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    meta = json.loads(blob[pos: pos + meta_len].decode("utf-8"))
    pos += meta_len
    (count,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        name = blob[pos: pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}Q", blob, pos)
        pos += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(shape)
        pos += 8 * size
        tensors[name] = arr.astype(np.float64)
    if pos != len(blob):
        raise CheckpointError("trailing bytes after last tensor")

    sup = SupervisedParams(tensors["ws_raw"].copy(), float(tensors["eta"]), float(tensors["epsilon"]))
    emb = EmbedParams(tensors["wc"].copy()) if "wc" in tensors else None
    head = None
    if "head.s_a" in tensors:
        head = HeadParams(**{n: tensors["head." + n].copy() for n in PARAM_NAMES},
                          dropout_p=float(tensors["dropout_p"]))
    model = ModelParams(
        K=int(tensors["K"]), alpha=float(tensors["alpha"]), beta=float(tensors["beta"]),
        sup=sup, emb=emb, head=head, vocabulary=tuple(meta["vocabulary"]),
        word_sums=tensors["word_sums"].copy(), label_kind=meta["label_kind"],
        mix_target=meta["mix_target"],
    )
    state = MessageState(tensors["messages"].copy()) if "messages" in tensors else None
    return model, state


def load(path):
    with open(path, "rb") as f:
        return loads(f.read())

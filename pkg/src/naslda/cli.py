"""Command-line entry point: synth, train, infer, eval, topics.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import checkpoint
from .corpus_io import (
    CLASSIFICATION,
    REGRESSION,
    load_corpus,
    load_embeddings,
    load_labels,
)
from .evaluation import EvalReport, classification_metrics, coherence, regression_metrics, topic_top_words
from .messages import normalize_k
from .synth import PRESETS, SynthSpec, generate, split_docs, write_synth
from .trainer import LOG_COLUMNS, TrainConfig, infer_messages, predict, train

logger = logging.getLogger("naslda")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# flag -> (TrainConfig field, converter); also the keys accepted in --config files
TRAIN_KEYS = {
    "topics": ("K", int),
    "alpha": ("alpha", float),
    "beta": ("beta", float),
    "eta": ("eta", float),
    "epsilon": ("epsilon", float),
    "hidden": ("hidden", lambda s: tuple(int(h) for h in str(s).split(","))),
    "dropout": ("dropout_p", float),
    "l2": ("l2_ws_wc", float),
    "lr": ("learning_rate", float),
    "rounds": ("rounds", int),
    "pairs_per_round": ("pairs_per_round", int),
    "seed": ("seed", int),
    "mix_target": ("mix_target", str),
    "grad_path": ("grad_path", str),
    "convergence_tol": ("convergence_tol", float),
    "heldout_sweeps": ("heldout_sweeps", int),
}


def read_config_file(path):
    """key=value lines; '#' starts a comment; dashes and underscores are equivalent."""
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_").lstrip("_")] = value
    return values


def _corpus_paths(spec, vocab=None):
    """Resolve a corpus argument: a directory (train.* inside), a prefix, or a .bow file."""
    if os.path.isdir(spec):
        prefix = os.path.join(spec, "train")
        bow = prefix + ".bow"
    elif spec.endswith(".bow"):
        prefix, bow = spec[:-4], spec
    elif os.path.isfile(spec):
        prefix, bow = None, spec
    else:
        prefix, bow = spec, spec + ".bow"
    if vocab is None and prefix is not None and os.path.isfile(prefix + ".vocab"):
        vocab = prefix + ".vocab"
    return bow, vocab, prefix


def _find_embeddings(spec, explicit):
    if explicit:
        return explicit
    base = spec if os.path.isdir(spec) else os.path.dirname(spec)
    candidate = os.path.join(base, "embeddings.txt")
    return candidate if os.path.isfile(candidate) else None


def _add_common(p):
    p.add_argument("--config")
    p.add_argument("--threads", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="naslda", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic corpus")
    _add_common(p)
    p.add_argument("--preset", choices=sorted(PRESETS), default="two-topic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--docs", type=int)
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a model")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab")
    p.add_argument("--labels")
    p.add_argument("--label-kind", choices=[CLASSIFICATION, REGRESSION], default=CLASSIFICATION)
    p.add_argument("--embeddings")
    p.add_argument("--no-embeddings", action="store_true")
    p.add_argument("--min-embedded-words", type=int, default=0)
    p.add_argument("--topics", "-K", type=int)
    for flag in ("alpha", "beta", "eta", "epsilon", "dropout", "l2", "lr", "convergence-tol"):
        p.add_argument("--" + flag, type=float)
    p.add_argument("--hidden")
    for flag in ("rounds", "pairs-per-round", "seed", "heldout-sweeps"):
        p.add_argument("--" + flag, type=int)
    p.add_argument("--mix-target", choices=["doc", "word"])
    p.add_argument("--grad-path", choices=["unroll1", "none"])
    p.add_argument("--out", default="model.ckpt")
    p.add_argument("--save-messages", action="store_true")

    for name, help_text in (("infer", "predict held-out documents"), ("eval", "evaluate a model")):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.add_argument("--model", required=True)
        p.add_argument("--heldout", required=True)
        p.add_argument("--vocab")
        p.add_argument("--labels")
        p.add_argument("--embeddings")
        p.add_argument("--no-embeddings", action="store_true")
        p.add_argument("--sweeps", type=int, default=50)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out")
        if name == "eval":
            p.add_argument("--top-n", type=int, default=15)
            p.add_argument("--coherence", choices=["umass", "npmi"], default="npmi")
            p.add_argument("--reference", help="reference corpus for coherence")
            p.add_argument("--emit-csv")
            p.add_argument("--label-kind", choices=[CLASSIFICATION, REGRESSION])

    p = sub.add_parser("topics", help="print top words per topic")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--top-n", type=int, default=15)
    p.add_argument("--corpus", help="reference corpus for coherence")
    p.add_argument("--vocab")
    p.add_argument("--coherence", choices=["umass", "npmi"], default="npmi")
    p.add_argument("--out")
    return parser


def effective_train_config(args) -> TrainConfig:
    values = {}
    if args.config:
        for key, raw in read_config_file(args.config).items():
            if key not in TRAIN_KEYS:
                raise ValueError(f"unknown config key {key!r}")
            field_name, conv = TRAIN_KEYS[key]
            values[field_name] = conv(raw)
    for key, (field_name, conv) in TRAIN_KEYS.items():
        v = getattr(args, key, None)
        if v is not None:
            values[field_name] = conv(v)
    if values.get("K", 1) < 1:
        raise ValueError("topics must be ≥ 1")
    values["use_embeddings"] = not args.no_embeddings
    return TrainConfig(**values)


def _limit_threads(n):
    if not n:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def cmd_synth(args):
    spec = PRESETS[args.preset]
    overrides = {"seed": args.seed}
    if args.docs:
        overrides["D"] = args.docs
    spec = SynthSpec(**{**spec.__dict__, **overrides})
    data = generate(spec)
    train_part, test_part = split_docs(data, args.train_fraction)
    paths = write_synth(train_part, args.out, "train")
    write_synth(test_part, args.out, "test")
    with open(os.path.join(args.out, "truth.json"), "w", encoding="utf-8") as f:
        json.dump({"spec": spec.__dict__, "phi": data.phi.tolist()}, f, sort_keys=True)
    print(json.dumps(paths, sort_keys=True))


def cmd_train(args):
    config = effective_train_config(args)
    bow, vocab, prefix = _corpus_paths(args.corpus, args.vocab)
    corpus = load_corpus(bow, vocab)
    labels_path = args.labels
    if labels_path is None and os.path.isdir(args.corpus) and os.path.isfile(prefix + ".labels"):
        labels_path = prefix + ".labels"
    labels = load_labels(labels_path, corpus, args.label_kind) if labels_path else None
    emb_path = None if args.no_embeddings else _find_embeddings(args.corpus, args.embeddings)
    table = load_embeddings(emb_path, corpus) if emb_path else None
    if args.min_embedded_words:
        if table is None:
            raise ValueError("--min-embedded-words needs embeddings")
        from .corpus_io import filter_min_embedded_words

        keep = filter_min_embedded_words(corpus, table, args.min_embedded_words)
        corpus = corpus.subset_docs(keep)
        labels = labels.subset(keep) if labels is not None else None
    if labels is None:
        logger.info("no labels: unsupervised message passing only (eta forced to 0)")

    header = {
        "command": "train", "corpus": bow, "vocab": vocab, "labels": labels_path,
        "label_kind": args.label_kind if labels is not None else None,
        "embeddings": emb_path, "min_embedded_words": args.min_embedded_words,
        "threads": args.threads, **config.as_dict(),
    }
    log_path = args.out + ".log.csv"
    with open(log_path, "w", encoding="utf-8", newline="") as f:
        for key in sorted(header):
            f.write(f"# {key}={header[key]}\n")
        writer = csv.writer(f)
        writer.writerow(LOG_COLUMNS)

        def log_row(row):
            writer.writerow([row[c] if not isinstance(row[c], float) else repr(row[c]) for c in LOG_COLUMNS])

        for key in sorted(header):
            logger.info("%s=%s", key, header[key])
        result = train(corpus, labels, table, config, callback=log_row)
    checkpoint.save(args.out, result.model, result.state if args.save_messages else None)
    last = result.log[-1] if result.log else {}
    print(json.dumps({"checkpoint": args.out, "log": log_path, "rounds": len(result.log),
                      "final": {k: last.get(k) for k in LOG_COLUMNS if k != "wall_ms"}},
                     sort_keys=True, default=float))


def _load_heldout(args, model):
    bow, vocab, prefix = _corpus_paths(args.heldout, args.vocab)
    heldout = load_corpus(bow, vocab)
    table = None
    if not args.no_embeddings and model.emb is not None:
        emb_path = _find_embeddings(args.heldout, args.embeddings)
        if emb_path is None:
            logger.warning("model uses embeddings but none were found; using uniform factors")
        else:
            table = load_embeddings(emb_path)
    return heldout, table, prefix


def _predict(args, model, heldout, table):
    _, doc_sums = infer_messages(model, heldout, table, sweeps=args.sweeps, seed=args.seed)
    return doc_sums, predict(model, doc_sums) if model.head is not None else None


def cmd_infer(args):
    model, _ = checkpoint.load(args.model)
    if model.head is None:
        raise ValueError("model was trained without labels; nothing to predict")
    heldout, table, _ = _load_heldout(args, model)
    _, out = _predict(args, model, heldout, table)
    out = np.atleast_2d(out.T).T
    stream = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(stream)
        for row in out:
            writer.writerow([repr(float(v)) for v in row])
    finally:
        if args.out:
            stream.close()


def cmd_eval(args):
    model, _ = checkpoint.load(args.model)
    heldout, table, prefix = _load_heldout(args, model)
    report = EvalReport(coherence_measure=args.coherence)
    if model.head is not None:
        labels_path = args.labels or (prefix + ".labels" if prefix and os.path.isfile(prefix + ".labels") else None)
        if labels_path is None:
            raise ValueError("eval needs held-out labels (--labels)")
        kind = args.label_kind or model.label_kind
        truth = load_labels(labels_path, heldout, kind)
        _, out = _predict(args, model, heldout, table)
        if kind == CLASSIFICATION:
            report.cross_entropy, report.accuracy = classification_metrics(out, truth)
        else:
            report.regression = regression_metrics(out, truth)
    phi = normalize_k(model.word_sums.T + model.beta)
    n = min(args.top_n, phi.shape[1])
    report.top_words = topic_top_words(phi, model.vocabulary, n)
    if args.reference:
        rbow, rvocab, _ = _corpus_paths(args.reference)
        reference = load_corpus(rbow, rvocab)
    else:
        reference = heldout
    report.coherence_per_topic, report.coherence_mean = coherence(report.top_words, reference, args.coherence)
    text = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    if args.emit_csv:
        with open(args.emit_csv, "w", encoding="utf-8") as f:
            f.write(report.coherence_csv())
    print(text)
    print(report.to_text(), file=sys.stderr)


def cmd_topics(args):
    model, _ = checkpoint.load(args.model)
    phi = normalize_k(model.word_sums.T + model.beta)
    report = EvalReport(coherence_measure=args.coherence)
    report.top_words = topic_top_words(phi, model.vocabulary, args.top_n)
    if args.corpus:
        bow, vocab, _ = _corpus_paths(args.corpus, args.vocab)
        report.coherence_per_topic, report.coherence_mean = coherence(
            report.top_words, load_corpus(bow, vocab), args.coherence)
    text = report.to_text()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(report.to_json() + "\n")
    print(text)


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "infer": cmd_infer, "eval": cmd_eval,
            "topics": cmd_topics}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"naslda: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    limiter = _limit_threads(args.threads)
    try:
        COMMANDS[args.command](args)
    except (OSError, checkpoint.CheckpointError) as exc:
        print(f"naslda: I/O error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"naslda: error: {exc}", file=sys.stderr)
        return 1
    finally:
        if limiter is not None:
            limiter.restore_original_limits()
    return 0


if __name__ == "__main__":
    sys.exit(main())

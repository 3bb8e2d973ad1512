"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict; the lines are printed together in the
terminal summary (see ``conftest.pytest_terminal_summary``).  Thresholds
are asserted as stated and never relaxed here.
"""

import logging
import os
import time

import numpy as np
import pytest

from naslda import checkpoint
from naslda.bp import LdaHyperParams, update_pair_unsupervised
from naslda.cli import main
from naslda.embed import build_u_table, update_pair_full
from naslda.evaluation import coherence, match_topics, topic_top_words
from naslda.head import forward
from naslda.messages import MessageState, estimate_phi, estimate_theta, init_messages, rebuild_cache
from naslda.supervised import SupervisedParams, na_super, softplus, softplus_inv, update_pair_supervised
from naslda.synth import (
    SynthSpec,
    drop_words,
    generate,
    sample_documents,
    split_docs,
    unseen_word_split,
)
from naslda.trainer import TrainConfig, infer_heldout, train

from conftest import random_corpus, random_labels
from gradcheck import check_configuration
from oracles import brute_sweep

RESULTS = []

SEEDS = range(10)


def record(number, passed, detail):
    RESULTS.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}")


@pytest.fixture(autouse=True)
def quiet_logs():
    logging.disable(logging.WARNING)
    yield
    logging.disable(logging.NOTSET)


def test_criterion_01_bp_oracle():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for trial in range(50):
        corpus = random_corpus(rng, max_docs=4, max_words=5, max_count=3)
        K = int(rng.integers(1, 4))
        alpha, beta = rng.uniform(0.01, 2.0, size=2)
        state = init_messages(corpus, K, trial)
        got = update_pair_unsupervised(np.arange(corpus.nnz), rebuild_cache(corpus, state), state, corpus,
                                       LdaHyperParams(alpha, beta))
        worst = max(worst, float(np.abs(got - brute_sweep(corpus, state.messages, alpha, beta)).max()))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 5
    record(1, ok, f"BP oracle max|diff|={worst:.2e} (<1e-10), {elapsed:.2f}s (<5s)")
    assert ok


def test_criterion_02_supervised_and_full_oracle():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    worst_sup = worst_full = 0.0
    for trial in range(50):
        corpus = random_corpus(rng, max_docs=4, max_words=5, max_count=3)
        labels = random_labels(rng, corpus.num_docs, 2)
        K = int(rng.integers(1, 4))
        E = int(rng.integers(1, 4))
        alpha, beta = rng.uniform(0.01, 2.0, size=2)
        eta = float(rng.uniform(0.05, 0.95))
        ws = rng.uniform(0.2, 3.0, size=K)
        sup = SupervisedParams(softplus_inv(ws), eta=eta)
        vectors = rng.normal(size=(corpus.num_words, E))
        has = rng.random(corpus.num_words) < 0.8
        wc = rng.normal(size=(K, E))
        state = init_messages(corpus, K, trial)
        cache = rebuild_cache(corpus, state, labels)
        idx = np.arange(corpus.nnz)
        hyper = LdaHyperParams(alpha, beta)

        got = update_pair_supervised(idx, cache, state, corpus, hyper, labels, sup)
        want = brute_sweep(corpus, state.messages, alpha, beta, labels=labels.values, ws=ws, eta=eta)
        worst_sup = max(worst_sup, float(np.abs(got - want).max()))

        got = update_pair_full(idx, cache, state, corpus, hyper, labels, sup, build_u_table(vectors, has, wc))
        vec_list = [vectors[w].tolist() if has[w] else None for w in range(corpus.num_words)]
        want = brute_sweep(corpus, state.messages, alpha, beta, labels=labels.values, ws=ws, eta=eta,
                           vectors=vec_list, wc=wc.tolist())
        worst_full = max(worst_full, float(np.abs(got - want).max()))
    elapsed = time.perf_counter() - start
    ok = worst_sup < 1e-10 and worst_full < 1e-10 and elapsed < 10
    record(2, ok, f"supervised max|diff|={worst_sup:.2e}, full max|diff|={worst_full:.2e} (<1e-10), "
                  f"{elapsed:.2f}s (<10s)")
    assert ok


def test_criterion_03_reduction_chain():
    rng = np.random.default_rng(303)
    sup_ok = full_ok = 0
    for seed in SEEDS:
        corpus = random_corpus(rng, max_docs=6, max_words=6)
        labels = random_labels(rng, corpus.num_docs, 2)
        K, E = 3, 2
        state = init_messages(corpus, K, seed)
        cache = rebuild_cache(corpus, state, labels)
        idx = np.arange(corpus.nnz)
        hyper = LdaHyperParams(0.2, 0.05)
        raw = rng.normal(size=K)
        plain = update_pair_unsupervised(idx, cache, state, corpus, hyper)
        eta0 = update_pair_supervised(idx, cache, state, corpus, hyper, labels, SupervisedParams(raw, eta=0.0))
        sup_ok += eta0.tobytes() == plain.tobytes()

        sup = SupervisedParams(raw, eta=0.3)
        vectors = rng.normal(size=(corpus.num_words, E))
        zero = build_u_table(vectors, np.ones(corpus.num_words, dtype=bool), np.zeros((K, E)))
        full = update_pair_full(idx, cache, state, corpus, hyper, labels, sup, zero)
        supervised = update_pair_supervised(idx, cache, state, corpus, hyper, labels, sup)
        full_ok += full.tobytes() == supervised.tobytes()
    ok = sup_ok == len(SEEDS) and full_ok == len(SEEDS)
    record(3, ok, f"eta=0 bitwise {sup_ok}/10 seeds, wc=0 bitwise {full_ok}/10 seeds")
    assert ok


def test_criterion_04_gradient_suite():
    start = time.perf_counter()
    worst = {}
    for seed in range(20):
        for name, value in check_configuration(seed).items():
            worst[name] = max(worst.get(name, -np.inf), value)
    elapsed = time.perf_counter() - start
    bad = [name for name, v in worst.items() if v > 0]
    ok = not bad and elapsed < 30
    record(4, ok, f"20 configs, {len(worst)} parameter groups within 1e-5 rel / 1e-8 abs"
                  f"{' except ' + ', '.join(bad) if bad else ''}, {elapsed:.2f}s (<30s)")
    assert ok


def test_criterion_05_invariance_suite():
    rng = np.random.default_rng(505)
    checks = {}

    # simplex preservation after 100 sweeps of the full engine
    corpus = random_corpus(rng, max_docs=6, max_words=6, min_docs=3)
    labels = random_labels(rng, corpus.num_docs)
    K = 3
    state = init_messages(corpus, K, 0)
    utab = build_u_table(rng.normal(size=(corpus.num_words, 2)), np.ones(corpus.num_words, dtype=bool),
                         rng.normal(size=(K, 2)))
    sup = SupervisedParams(rng.normal(size=K), eta=0.3)
    for _ in range(100):
        new = update_pair_full(np.arange(corpus.nnz), rebuild_cache(corpus, state, labels), state, corpus,
                               LdaHyperParams(0.1, 0.01), labels, sup, utab)
        state = MessageState(new, state.iteration + 1)
    checks["simplex"] = state.check_simplex(1e-9)

    # topic-permutation equivariance, unsupervised engine, K <= 4
    perm_err = 0.0
    for K in (1, 2, 3, 4):
        corpus = random_corpus(rng, max_docs=4, max_words=5)
        hyper = LdaHyperParams(0.3, 0.05)
        perm = rng.permutation(K)
        a = init_messages(corpus, K, K)
        b = MessageState(a.messages[:, perm])
        for _ in range(20):
            a = MessageState(update_pair_unsupervised(np.arange(corpus.nnz), rebuild_cache(corpus, a), a, corpus, hyper))
            b = MessageState(update_pair_unsupervised(np.arange(corpus.nnz), rebuild_cache(corpus, b), b, corpus, hyper))
        perm_err = max(perm_err,
                       float(np.abs(b.messages - a.messages[:, perm]).max()),
                       float(np.abs(estimate_theta(corpus, b, 0.3) - estimate_theta(corpus, a, 0.3)[:, perm]).max()),
                       float(np.abs(estimate_phi(corpus, b, 0.05) - estimate_phi(corpus, a, 0.05)[perm]).max()))
    checks["permutation"] = perm_err < 1e-12

    # scalar W_s: same values and argmax
    ws_err, argmax_ok = 0.0, True
    for _ in range(100):
        K = int(rng.integers(2, 5))
        agg = rng.exponential(size=K)
        raw = rng.normal(size=K)
        c = float(rng.uniform(0.01, 100))
        a = na_super(agg, raw)
        b = na_super(agg, softplus_inv(c * softplus(raw)))
        ws_err = max(ws_err, float(np.abs(a - b).max()))
        argmax_ok &= int(np.argmax(a)) == int(np.argmax(b))
    checks["scalar_ws"] = ws_err < 1e-9 and argmax_ok

    # softmax shift invariance
    from naslda.head import HeadParams

    head = HeadParams.init(3, 5, 5, 4, seed=1)
    feats = rng.dirichlet(np.ones(3), size=10)
    _, p = forward(feats, head)
    head.t_c = head.t_c + 37.5
    _, q = forward(feats, head)
    shift_err = float(np.abs(p - q).max())
    checks["softmax_shift"] = shift_err < 1e-12

    ok = all(checks.values())
    record(5, ok, f"simplex={checks['simplex']}, permutation err={perm_err:.1e}, "
                  f"scalar W_s err={ws_err:.1e}, softmax shift err={shift_err:.1e}")
    assert ok


def test_criterion_06_topic_recovery():
    start = time.perf_counter()
    tvs = []
    for seed in SEEDS:
        data = generate(SynthSpec(D=400, W=60, K_true=3, S=3, doc_length=40, topic_sharpness=0.05, seed=seed))
        cfg = TrainConfig(K=3, alpha=0.1, beta=0.01, rounds=200, pairs_per_round=10 ** 9,
                          convergence_tol=1e-6, seed=seed)
        result = train(data.corpus, None, None, cfg)
        _, tv = match_topics(estimate_phi(data.corpus, result.state, cfg.beta), data.phi)
        tvs.append(tv)
    elapsed = time.perf_counter() - start
    hits = sum(tv < 0.25 for tv in tvs)
    ok = hits >= 8 and elapsed < 120
    record(6, ok, f"mean TV < 0.25 in {hits}/10 seeds (need 8), worst {max(tvs):.3f}, {elapsed:.1f}s (<120s)")
    assert ok


ACCEPTANCE_TRAIN = dict(K=2, alpha=0.1, beta=0.01, learning_rate=2.0, rounds=300, convergence_tol=0.0)


def test_criterion_07_supervised_lift():
    start = time.perf_counter()
    rows = []
    for seed in SEEDS:
        data = generate(SynthSpec(D=400, S=2, label_rule="argmax", embed_noise=0.1, seed=seed))
        train_part, test_part = split_docs(data, 0.75)
        accs = []
        for eta, use_emb in ((0.2, True), (0.2, False), (0.0, False)):
            cfg = TrainConfig(eta=eta, use_embeddings=use_emb, seed=seed, **ACCEPTANCE_TRAIN)
            result = train(train_part.corpus, train_part.labels, data.table if use_emb else None, cfg)
            probs = infer_heldout(result.model, test_part.corpus, data.table)
            accs.append(float(np.mean(np.argmax(probs, axis=1) == test_part.labels.values)))
        rows.append(accs)
    elapsed = time.perf_counter() - start
    ordered = sum(a[0] >= a[1] >= a[2] for a in rows)
    full_min = min(a[0] for a in rows)
    ok = ordered >= 8 and all(a[0] >= 0.9 for a in rows) and elapsed < 300
    record(7, ok, f"full >= supervised >= unsupervised in {ordered}/10 seeds (need 8), "
                  f"min full accuracy {full_min:.3f} (>=0.9), {elapsed:.1f}s (<300s)")
    assert ok


def test_criterion_08_out_of_vocabulary_leverage():
    gains, fractions = [], []
    for seed in SEEDS:
        data = generate(SynthSpec(D=400, S=2, label_rule="argmax", embed_noise=0.1, seed=seed))
        hidden = unseen_word_split(data)
        train_corpus = drop_words(data.corpus, hidden)
        # short held-out documents leave the most room for the unseen half to matter
        heldout = sample_documents(data, 400, 4, seed=seed + 1000)
        unseen = np.isin(heldout.corpus.words, hidden)
        fractions.append(heldout.corpus.counts[unseen].sum() / heldout.corpus.counts.sum())
        cfg = TrainConfig(eta=0.2, seed=seed, **ACCEPTANCE_TRAIN)
        result = train(train_corpus, data.labels, data.table, cfg)
        truth = heldout.labels.values
        full = infer_heldout(result.model, heldout.corpus, data.table)
        ablated = infer_heldout(result.model, heldout.corpus, data.table, use_embeddings=False)
        gains.append(float(np.mean(full.argmax(1) == truth) - np.mean(ablated.argmax(1) == truth)))
    wins = sum(g >= 0.05 for g in gains)
    ok = wins >= 8
    record(8, ok, f"embedding gain >= 0.05 in {wins}/10 seeds (need 8); gains "
                  f"{', '.join(f'{g:+.3f}' for g in gains)}; unseen token share "
                  f"{min(fractions):.2f}-{max(fractions):.2f}")
    assert ok


def test_criterion_09_cli_determinism(tmp_path):
    data_dir = tmp_path / "data"
    assert main(["synth", "--preset", "two-topic", "--seed", "3", "--out", str(data_dir)]) == 0
    outputs = []
    for threads in (1, os.cpu_count() or 1, 4):
        out = tmp_path / f"threads{threads}"
        out.mkdir(exist_ok=True)
        ckpt = out / "m.ckpt"
        assert main(["train", "--corpus", str(data_dir), "--topics", "4", "--seed", "7", "--rounds", "20",
                     "--threads", str(threads), "--save-messages", "--out", str(ckpt)]) == 0
        assert main(["eval", "--model", str(ckpt), "--heldout", str(data_dir / "test"),
                     "--threads", str(threads), "--out", str(out / "report.json")]) == 0
        assert main(["topics", "--model", str(ckpt), "--corpus", str(data_dir), "--threads", str(threads),
                     "--out", str(out / "topics.json")]) == 0
        outputs.append(tuple((out / name).read_bytes() for name in ("m.ckpt", "report.json", "topics.json")))
    ok = all(o == outputs[0] for o in outputs[1:])
    record(9, ok, "checkpoint, eval report and topic report bitwise identical for --threads 1 / N")
    assert ok


def test_criterion_10_coherence_sanity():
    rng = np.random.default_rng(1010)
    margins = []
    for seed in range(3):
        data = generate(SynthSpec(D=400, W=60, K_true=3, S=3, doc_length=40, topic_sharpness=0.05, seed=seed))
        cfg = TrainConfig(K=3, alpha=0.1, rounds=200, pairs_per_round=10 ** 9, convergence_tol=1e-6, seed=seed)
        result = train(data.corpus, None, None, cfg)
        top = topic_top_words(estimate_phi(data.corpus, result.state, cfg.beta), data.corpus.vocabulary, 10)
        _, learned = coherence(top, data.corpus, "npmi")
        vocab = np.array(data.corpus.vocabulary)
        randoms = [[list(vocab[rng.choice(len(vocab), size=10, replace=False)]) for _ in range(3)]
                   for _ in range(20)]
        baseline = float(np.mean([coherence(r, data.corpus, "npmi")[1] for r in randoms]))
        margins.append(learned - baseline)
    ok = min(margins) >= 0.2
    record(10, ok, f"NPMI(learned) - NPMI(random) = {', '.join(f'{m:.3f}' for m in margins)} (>=0.2)")
    assert ok

"""Recovering planted topics with plain belief propagation.

We draw a three-topic corpus whose true word distributions are known,
run unsupervised training without labels or embeddings, and compare the estimated topics with the planted ones after
the best one-to-one matching.

Run with:  python3 demos/01_topic_recovery.py
"""
import logging

import numpy as np

from naslda.evaluation import coherence, match_topics, topic_top_words
from naslda.messages import estimate_phi
from naslda.synth import PRESETS, generate
from naslda.trainer import TrainConfig, train

logging.basicConfig(level=logging.WARNING)

# %% A corpus with a known answer
spec = PRESETS["three-topic"]
data = generate(spec)
corpus = data.corpus
print(f"{corpus.num_docs} documents, {len(corpus.vocabulary)} words, "
      f"{int(corpus.counts.sum())} tokens")

# %% Fit: every (document, word) pair is refreshed each round
cfg = TrainConfig(K=3, alpha=0.1, beta=0.01, eta=0.0, rounds=200,
                  pairs_per_round=10 ** 9, convergence_tol=1e-6, seed=0)
result = train(corpus, None, None, cfg)
print(f"stopped after {len(result.log)} rounds, "
      f"last mean message change {result.log[-1]['mean_message_delta']:.2e}")

# %% How close are we?
phi = estimate_phi(corpus, result.state, cfg.beta)
assignment, mean_tv = match_topics(phi, data.phi)
print(f"mean total-variation distance to the planted topics: {mean_tv:.3f}")
for k, j in enumerate(assignment):
    tv = 0.5 * np.abs(phi[j] - data.phi[k]).sum()
    print(f"  true topic {k} <- estimated topic {j}  (TV {tv:.3f})")

# %% Top words and their coherence on the training corpus itself
top = topic_top_words(phi, corpus.vocabulary, 8)
per_topic, mean_npmi = coherence(top, corpus)
for words, score in zip(top, per_topic):
    print(f"  NPMI {score:+.3f}  {' '.join(words)}")
print(f"mean NPMI {mean_npmi:+.3f}")

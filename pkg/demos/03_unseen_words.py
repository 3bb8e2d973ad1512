"""Words never seen in training, known only through their embeddings.

About half of each topic's probability mass is removed from the training
corpus. At test time short documents are drawn from the full vocabulary,
so many of their tokens are words the topic model has never counted.
The embedding factor is the only route by which those tokens can inform
the topic mixture.

We compare held-out accuracy with the embedding factor switched on and
off. The gain is small and noisy at this scale; see the README for the
numbers we measured across seeds.

Run with:  python3 demos/03_unseen_words.py [seed]
"""
import logging
import sys

import numpy as np

from naslda.synth import SynthSpec, drop_words, generate, sample_documents, unseen_word_split
from naslda.trainer import TrainConfig, infer_heldout, train

logging.basicConfig(level=logging.ERROR)
seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0

data = generate(SynthSpec(D=400, S=2, embed_noise=0.1, seed=seed))
hidden = unseen_word_split(data)
train_corpus = drop_words(data.corpus, hidden)
print(f"hid {len(hidden)} of {len(data.corpus.vocabulary)} words from training")

heldout = sample_documents(data, 400, 4, seed=seed + 1000)
unseen = np.isin(heldout.corpus.words, hidden)
share = heldout.corpus.counts[unseen].sum() / heldout.corpus.counts.sum()
print(f"unseen share of held-out tokens: {share:.2f}")

cfg = TrainConfig(K=2, alpha=0.1, beta=0.01, eta=0.2, learning_rate=2.0, rounds=300,
                  convergence_tol=0.0, seed=seed)
model = train(train_corpus, data.labels, data.table, cfg).model
print("learned W_C:\n", np.round(model.emb.wc, 3))

truth = heldout.labels.values
acc = {}
for use in (True, False):
    probs = infer_heldout(model, heldout.corpus, data.table, use_embeddings=use)
    acc[use] = float(np.mean(probs.argmax(axis=1) == truth))
print(f"accuracy with embeddings {acc[True]:.3f}, without {acc[False]:.3f}, "
      f"gain {acc[True] - acc[False]:+.3f}")

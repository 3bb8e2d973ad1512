"""Does supervision help classification?

Three models are trained on the same two-class synthetic corpus:

* unsupervised topics with a classifier head on top (eta = 0),
* supervised messages (eta = 0.2),
* supervised messages plus word-embedding factors.

Held-out accuracy is printed for each. On this easy corpus all three
usually land close together; the interesting part is the ordering.

Run with:  python3 demos/02_supervised_lift.py [seed]
"""
import logging
import sys

from naslda.evaluation import classification_metrics
from naslda.synth import SynthSpec, generate, split_docs
from naslda.trainer import TrainConfig, infer_heldout, train

logging.basicConfig(level=logging.WARNING)
seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0

data = generate(SynthSpec(D=400, S=2, embed_noise=0.1, seed=seed))
train_part, test_part = split_docs(data, 0.75)
print(f"train {train_part.corpus.num_docs} docs, test {test_part.corpus.num_docs} docs")

# A large step size and a small alpha let the head learn within a few
# hundred rounds on a corpus this small.
common = dict(K=2, alpha=0.1, beta=0.01, learning_rate=2.0, rounds=300, convergence_tol=0.0, seed=seed)

variants = {
    "unsupervised": dict(eta=0.0, use_embeddings=False),
    "supervised": dict(eta=0.2, use_embeddings=False),
    "supervised + embeddings": dict(eta=0.2, use_embeddings=True),
}
for name, extra in variants.items():
    cfg = TrainConfig(**common, **extra)
    table = data.table if cfg.use_embeddings else None
    result = train(train_part.corpus, train_part.labels, table, cfg)
    probs = infer_heldout(result.model, test_part.corpus, data.table)
    loss, acc = classification_metrics(probs, test_part.labels.values)
    print(f"{name:<26s} held-out accuracy {acc:.3f}, held-out cross-entropy {loss:.4f}")

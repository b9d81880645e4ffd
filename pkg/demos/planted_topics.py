"""Recover planted topics with NSMTM and look at the sparse mixtures.

Five topics own disjoint 20-word blocks of a 100-word vocabulary; each
document draws from one or two of them.  Takes a few seconds.

Run: python demos/planted_topics.py
"""

import numpy as np

from sparsetopic.corpus import split_heldout
from sparsetopic.datasets import planted_corpus
from sparsetopic.metrics import topic_sparsity_theta
from sparsetopic.topicmodel import TrainConfig, infer_theta, top_words, train

pc = planted_corpus(seed=0)
train_part, test = split_heldout(pc.corpus, 0.1, seed=0)
cfg = TrainConfig(variant="nsmtm", n_topics=5, latent_dim=5, embed_init_scale=0.1, epochs=50, seed=0)
result = train(train_part, cfg)
model = result.model
print("loss by epoch:", " ".join(f"{x:.1f}" for x in result.epoch_loss[::10]))

for k in range(5):
    words = [w for w, _ in top_words(model, k, 10)]
    blocks = sorted({model.vocab.lookup(w) // 20 for w in words})
    print(f"topic {k}: {' '.join(words)}   planted blocks {blocks}")

thetas = [infer_theta(model, doc.merged()).theta for doc in test[:8]]
for doc, theta in zip(test[:8], thetas):
    print("theta", np.round(theta.values, 2), "active", theta.support.tolist())
print("mean TS(theta) on the first 8 held-out docs:",
      round(topic_sparsity_theta(np.array([t.values for t in thetas])), 3))

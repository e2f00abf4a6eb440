# Soft word sets, fused embeddings and per-sample augmentation plans.
import numpy as np

from softaug.augment import AugmentConfig, SoftWordSet, format_plan, fuse_embedding, make_plan
from softaug.corpus import build_vocab
from softaug.neighbors import NeighborConfig, train_cbow
from softaug.toydata import toy_dialogues

# the original token keeps score 1; neighbors bring their cosine scores
s = SoftWordSet((7, 8, 9), (1.0, 0.5, 0.5))
print("p =", s.probs)

E = np.eye(10)
print("fused =", fuse_embedding(s, E)[6:10])

train, _, _ = toy_dialogues(n_train=500, n_valid=1, n_test=1, seed=0)
vocab = build_vocab(train)
model = train_cbow(train, NeighborConfig(dim=30, epochs=5, seed=0), vocab=vocab)
sample = train.encode(vocab)[3]

rng = np.random.default_rng(0)
plan = make_plan(sample, model, AugmentConfig(rho=0.4, tau=0.4, k=3), rng)
print(" ".join(vocab.decode(sample.history)))
print(" ".join(vocab.decode(sample.response)))
print(format_plan(sample, plan, vocab))

# punctuation, articles and the listed prepositions are never chosen
plan = make_plan(sample, model, AugmentConfig(rho=1.0, tau=0.4, k=3), rng)
print("all eligible history positions:", sorted(plan.history_targets))

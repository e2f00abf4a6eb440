# Semantic neighbors from an in-domain CBOW model.
import numpy as np

from softaug.corpus import build_vocab
from softaug.neighbors import NeighborConfig, query_neighbors, train_cbow
from softaug.toydata import synonym_corpus, toy_dialogues

# planted synonym pairs share their private context words
split, pairs = synonym_corpus(n_pairs=20, n_sentences=3000, seed=1)
model = train_cbow(split, NeighborConfig(dim=40, epochs=4, seed=0))
print("epoch losses:", np.round(model.epoch_losses, 3))

v = model.vocab
hits = sum(v.id(b) in {n.token for n in query_neighbors(model, v.id(a), 5, 0.0)} for a, b in pairs)
print(f"{hits}/{len(pairs)} partners inside the top 5")

a, b = pairs[0]
for n in query_neighbors(model, v.id(a), 5, 0.4):
    print(f"  {a} -> {v.token(n.token):<10} {n.score:.3f}")

# on the dialogue corpus the reply synonyms cluster together
train, _, _ = toy_dialogues(n_train=1000, n_valid=1, n_test=1, seed=0)
vocab = build_vocab(train)
dlg = train_cbow(train, NeighborConfig(dim=40, epochs=10, seed=0), vocab=vocab)
for word in ("love", "great"):
    print(word, [(vocab.token(n.token), round(n.score, 3)) for n in query_neighbors(dlg, vocab.id(word), 5, 0.4)])

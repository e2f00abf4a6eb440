# Training with the alternating schedule, then beam-search decoding.
from softaug.experiments import Data, generate
from softaug.metrics import evaluate
from softaug.neighbors import NeighborConfig, train_cbow
from softaug.toydata import toy_dialogues
from softaug.training import TrainConfig, train

train_split, valid, test = toy_dialogues(n_train=400, n_valid=40, n_test=10, seed=0)
data = Data.from_splits(train_split, valid, test)
neighbors = train_cbow(train_split, NeighborConfig(dim=30, epochs=5, seed=0), vocab=data.vocab)

cfg = TrainConfig(mode="EA", rho=0.4, d=24, hidden=24, epochs=4, lr=0.01, batch_size=16, seed=0)
result = train(data.train, data.vocab, cfg, neighbors, data.valid,
               log=lambda r: print(f"epoch {r.epoch} loss {r.train_loss:.3f} valid ppl {r.valid_ppl:.2f}"))

# even steps are augmented, odd steps are plain
print([int(s.augmented) for s in result.steps[:10]])
print("best epoch:", result.best_epoch)

responses = generate(result.params, data.test, data.vocab, beam=3, max_len=20)
for sample, resp in list(zip(data.test, responses))[:3]:
    print(" ".join(data.vocab.decode(sample.history)), "->", " ".join(resp))
print(evaluate(responses, data.references).table())

# The experiment runners behind the sweep-rho and ablation commands, at toy size.
# Models this small decode near-constant replies, so the diversity numbers here
# only show the wiring; validation PPL and the history-target counts are the
# readable part. tests/test_acceptance.py runs the 5-seed comparison.
from softaug.experiments import Data, ablation, sweep_rho
from softaug.neighbors import NeighborConfig, train_cbow
from softaug.toydata import toy_dialogues
from softaug.training import TrainConfig

train_split, valid, test = toy_dialogues(n_train=400, n_valid=40, n_test=40, seed=1)
data = Data.from_splits(train_split, valid, test)
neighbors = train_cbow(train_split, NeighborConfig(dim=20, epochs=20, seed=0), vocab=data.vocab)
cfg = TrainConfig(d=16, hidden=16, epochs=8, lr=0.02, batch_size=16, seed=0)

for row in sweep_rho(data, cfg, neighbors, [0.0, 0.4, 0.8]):
    print(row)

runs = ablation(data, cfg, neighbors)
for mode, res in runs.items():
    aug = [s for s in res.train.steps if s.augmented]
    print(f"{mode:<15} valid ppl {res.valid_ppl:7.2f}  history targets {sum(s.history_targets for s in aug):4d}"
          f"  dist-2 {res.metrics.dist_2:.3f}")

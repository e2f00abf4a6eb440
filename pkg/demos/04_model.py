# The attention encoder-decoder, checked against finite differences.
import numpy as np

from softaug.augment import AugmentationPlan, SoftWordSet
from softaug.corpus import EOS, DialogueSample
from softaug.seq2seq import BLOCK_NAMES, forward, init_params, loss_and_grads, make_batch, nll_sum

rng = np.random.default_rng(0)
params = init_params(12, 4, 4, rng, scale=0.5)
print({k: v.shape for k, v in list(params.items())[:6]}, "...", len(BLOCK_NAMES), "blocks")

sample = DialogueSample((5, 6, 7, 3, 8), (9, 10, EOS))
plan = AugmentationPlan({1: SoftWordSet((6, 11), (1.0, 0.6))}, {0: SoftWordSet((9, 5), (1.0, 0.8))})

outs = forward(sample, plan, params)
print("steps:", len(outs), "row sums:", [round(float(o.probs.sum()), 12) for o in outs])

batch = make_batch([sample], [plan])
loss, grads = loss_and_grads(params, batch)
print("token-mean loss:", loss)

# central differences on a few entries of each block
for name in ("E", "enc_b_W_hh", "att_v", "dec_W_ih", "out_b"):
    arr = params[name]
    idx = tuple(rng.integers(s) for s in arr.shape)
    old = arr[idx]
    arr[idx] = old + 1e-5
    up = nll_sum(params, batch) / batch.n_tokens
    arr[idx] = old - 1e-5
    down = nll_sum(params, batch) / batch.n_tokens
    arr[idx] = old
    print(f"{name:<12} analytic {grads[name][idx]: .8f}  numeric {(up - down) / 2e-5: .8f}")

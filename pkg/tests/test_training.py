import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from softaug.augment import AugmentationPlan, SoftWordSet
from softaug.corpus import EOS, DialogueSample, Vocabulary
from softaug.neighbors import NeighborModel
from softaug.seq2seq import StepOutput, forward, init_params, loss_and_grads, make_batch
from softaug.training import (MODES, AdamState, TrainConfig, adam_step, clip_global_norm, hard_ce_loss,
                              perplexity, replace_tokens, sequence_loss, soft_ce_loss, soft_target, train)


def test_soft_ce_examples():
    assert soft_ce_loss(np.array([0, 0, 0, 0, 0, 1.0]), SoftWordSet.singleton(5)) == 0.0
    g = np.zeros(8)
    g[5] = g[6] = 0.5
    assert soft_ce_loss(g, SoftWordSet((5, 6), (1.0, 1.0))) == pytest.approx(math.log(2), abs=1e-15)
    g[6] = 0.0
    with pytest.raises(ValueError):
        soft_ce_loss(g, SoftWordSet((5, 6), (1.0, 1.0)))


def test_hard_ce_examples():
    assert hard_ce_loss(np.array([0.0, 1.0]), 1) == 0.0
    assert hard_ce_loss(np.array([1 - math.exp(-2), math.exp(-2)]), 1) == pytest.approx(2.0, abs=1e-15)
    with pytest.raises(ValueError):
        hard_ce_loss(np.array([1.0, 0.0]), 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_soft_ce_oracle_and_degenerate(seed):
    rng = np.random.default_rng(seed)
    g = oracles.softmax(rng.normal(size=10))
    k = int(rng.integers(1, 6))
    toks = rng.choice(np.arange(5, 10), size=k, replace=False)
    scores = [1.0] + list(rng.uniform(0.05, 1.0, size=k - 1))
    s = SoftWordSet(tuple(int(t) for t in toks), tuple(scores))
    total = sum(scores)
    manual = -sum(sc / total * math.log(g[t]) for t, sc in zip(toks, scores))
    assert soft_ce_loss(g, s) == pytest.approx(manual, abs=1e-12)
    t = int(toks[0])
    assert soft_ce_loss(g, SoftWordSet.singleton(t)) == hard_ce_loss(g, t)


def test_soft_ce_minimised_at_target():
    s = SoftWordSet((5, 6, 7), (1.0, 0.6, 0.3))
    p = soft_target(s, 9)
    entropy = -sum(q * math.log(q) for q in s.probs)
    assert soft_ce_loss(p, s) == pytest.approx(entropy, abs=1e-14)
    rng = np.random.default_rng(0)
    for _ in range(20):
        g = np.abs(p + 0.05 * rng.normal(size=9)) + 1e-3
        g /= g.sum()
        assert soft_ce_loss(g, s) > entropy


def _outputs(rng, M, V=9):
    return [StepOutput(z, oracles.softmax(z), None) for z in rng.normal(size=(M, V))]


def test_sequence_loss_dispatch():
    rng = np.random.default_rng(1)
    outs = _outputs(rng, 3)
    resp = (5, 6, EOS)
    hard = np.mean([-math.log(o.probs[t]) for o, t in zip(outs, resp)])
    assert sequence_loss(outs, resp, None) == pytest.approx(hard, abs=1e-15)
    degenerate = AugmentationPlan({}, {0: SoftWordSet.singleton(5), 1: SoftWordSet.singleton(6)})
    assert sequence_loss(outs, resp, degenerate) == pytest.approx(hard, abs=1e-15)
    s = SoftWordSet((6, 7), (1.0, 0.5))
    mixed = AugmentationPlan({}, {1: s})
    want = (-math.log(outs[0].probs[5]) - (2 / 3 * math.log(outs[1].probs[6]) + 1 / 3 * math.log(outs[1].probs[7]))
            - math.log(outs[2].probs[EOS])) / 3
    assert sequence_loss(outs, resp, mixed) == pytest.approx(want, abs=1e-14)
    with pytest.raises(ValueError):
        sequence_loss(outs[:2], resp, None)


def test_logit_gradient_is_g_minus_target():
    # a model whose out_W is zero has logits = out_b, so d loss / d out_b is the logit gradient
    params = init_params(10, 3, 3, np.random.default_rng(2), scale=0.5)
    params.blocks["out_W"][...] = 0.0
    sample = DialogueSample((5, 6), (7, EOS))
    s = SoftWordSet((7, 8, 9), (1.0, 0.7, 0.2))
    plan = AugmentationPlan({}, {0: s})
    _, grads = loss_and_grads(params, make_batch([sample], [plan]))
    g = oracles.softmax(params["out_b"])
    want = ((g - soft_target(s, 10)) + (g - np.eye(10)[EOS])) / 2
    np.testing.assert_allclose(grads["out_b"], want, atol=1e-12)
    # and the model's loss equals the scripted per-position sum
    outs = forward(sample, plan, params)
    assert sequence_loss(outs, sample.response, plan) == pytest.approx(
        loss_and_grads(params, make_batch([sample], [plan]))[0], abs=1e-12)


def test_adam_first_step_and_zero_grad():
    p = {"w": np.array([0.5])}
    st_ = AdamState.zeros_like(p)
    adam_step(p, {"w": np.array([1.0])}, st_, lr=1e-3)
    assert p["w"][0] == pytest.approx(0.5 - 1e-3 / (1 + 1e-8), abs=1e-15)
    before = p["w"].copy()
    q = {"w": before.copy()}
    adam_step(q, {"w": np.array([0.0])}, AdamState.zeros_like(q), lr=1e-3)
    assert np.array_equal(q["w"], before)
    with pytest.raises(FloatingPointError):
        adam_step(p, {"w": np.array([np.nan])}, st_)


def test_adam_matches_scripted_recurrence():
    rng = np.random.default_rng(3)
    x = rng.normal(size=4)
    p = {"w": x.copy()}
    state = AdamState.zeros_like(p)
    m = v = np.zeros(4)
    ref = x.copy()
    for t in range(1, 11):
        g = rng.normal(size=4)
        adam_step(p, {"w": g}, state, lr=0.01, beta1=0.8, beta2=0.99, eps=1e-6)
        m = 0.8 * m + 0.2 * g
        v = 0.99 * v + 0.01 * g * g
        ref = ref - 0.01 * (m / (1 - 0.8 ** t)) / (np.sqrt(v / (1 - 0.99 ** t)) + 1e-6)
    np.testing.assert_allclose(p["w"], ref, atol=1e-12)
    assert state.t == 10


def test_clip_global_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert clip_global_norm(g, 1.0) == 5.0
    np.testing.assert_allclose([g["a"][0], g["b"][0]], [0.6, 0.8], atol=1e-15)
    g = {"a": np.array([0.3])}
    clip_global_norm(g, 1.0)
    assert g["a"][0] == 0.3


def test_perplexity_uniform_and_oracle():
    params = init_params(10, 3, 3, np.random.default_rng(4))
    params.blocks["out_W"][...] = 0.0
    params.blocks["out_b"][...] = 0.0
    samples = [DialogueSample((5, 6), (7, EOS)), DialogueSample((8,), (EOS,))]
    assert perplexity(params, samples) == pytest.approx(10.0, abs=1e-12)
    params = init_params(10, 3, 3, np.random.default_rng(5), scale=0.7)
    nll, n = 0.0, 0
    for s in samples:
        for out, t in zip(forward(s, None, params), s.response):
            nll -= math.log(out.probs[t])
            n += 1
    ppl = perplexity(params, samples, batch_size=1)
    assert ppl == pytest.approx(math.exp(nll / n), abs=1e-9) and ppl >= 1
    with pytest.raises(ValueError):
        perplexity(params, [])


# ---------------------------------------------------------------------------
# training loop on a tiny synthetic problem


@pytest.fixture(scope="module")
def tiny_setup():
    words = ["cat", "dog", "pet", "red", "blue", "green", "likes", "hates", ",", "the"]
    vocab = Vocabulary(words)
    rng = np.random.default_rng(0)
    samples = []
    for _ in range(24):
        h = rng.choice(np.arange(5, len(vocab)), size=rng.integers(2, 5))
        r = rng.choice(np.arange(5, len(vocab)), size=rng.integers(1, 4))
        samples.append(DialogueSample(tuple(map(int, h)), tuple(map(int, r)) + (EOS,)))
    W = rng.normal(size=(len(vocab), 4))
    W[:5] = 0
    W[vocab.id("dog")] = W[vocab.id("cat")] + 0.2
    W[vocab.id("blue")] = W[vocab.id("red")] + 0.2
    return vocab, samples, NeighborModel(vocab, W, np.zeros_like(W), window=2)


def cfg(**kw):
    base = dict(d=4, hidden=4, batch_size=5, epochs=2, lr=0.01, seed=3, rho=0.5, tau=0.0, k=2)
    base.update(kw)
    return TrainConfig(**base)


def test_train_deterministic(tiny_setup):
    vocab, samples, nm = tiny_setup
    a = train(samples, vocab, cfg(), nm, samples[:6])
    b = train(samples, vocab, cfg(), nm, samples[:6])
    for k, v in a.params.items():
        assert np.array_equal(v, b.params[k])
    assert [s.loss for s in a.steps] == [s.loss for s in b.steps]
    assert [s.plan_digest for s in a.steps] == [s.plan_digest for s in b.steps]


def test_alternation_parity(tiny_setup):
    vocab, samples, nm = tiny_setup
    res = train(samples, vocab, cfg(epochs=3), nm)
    flags = [s.augmented for s in res.steps]
    assert flags == [s.step % 2 == 0 for s in res.steps]
    assert sum(flags) == math.ceil(len(flags) / 2)
    assert res.epochs[-1].augmented_steps == sum(flags) and res.epochs[-1].step_count == len(flags)
    base = train(samples, vocab, cfg(mode="baseline", epochs=1), None)
    assert not any(s.augmented for s in base.steps)


def test_rho_zero_matches_baseline(tiny_setup):
    vocab, samples, nm = tiny_setup
    ea = train(samples, vocab, cfg(rho=0.0), nm, samples[:6])
    base = train(samples, vocab, cfg(mode="baseline", rho=0.0), None, samples[:6])
    assert [s.loss for s in ea.steps] == [s.loss for s in base.steps]
    assert [(e.train_loss, e.valid_ppl) for e in ea.epochs] == [(e.train_loss, e.valid_ppl) for e in base.epochs]
    for k, v in ea.final_params.items():
        assert np.array_equal(v, base.final_params[k])


def test_modes_share_selection_stream(tiny_setup):
    vocab, samples, nm = tiny_setup
    runs = {m: train(samples, vocab, cfg(mode=m), nm) for m in MODES if m != "baseline"}
    digests = {m: [s.plan_digest for s in r.steps] for m, r in runs.items()}
    assert digests["EA"] == digests["no-soft-label"] == digests["rep"]
    assert all(s.history_targets == 0 for s in runs["no-history-aug"].steps)
    assert any(s.history_targets > 0 for s in runs["EA"].steps)
    assert [s.loss for s in runs["EA"].steps][0] != [s.loss for s in runs["no-soft-label"].steps][0]


def test_replace_tokens(tiny_setup):
    vocab, _, nm = tiny_setup
    sample = DialogueSample((vocab.id("cat"), vocab.id("the")), (vocab.id("red"), EOS))
    plan = AugmentationPlan({0: SoftWordSet.singleton(vocab.id("cat"))}, {0: SoftWordSet.singleton(vocab.id("red"))})
    out = replace_tokens(sample, plan, nm, 2, 0.0)
    assert out.history == (vocab.id("dog"), vocab.id("the"))
    assert out.response == (vocab.id("blue"), EOS)


def test_best_epoch_selection(tiny_setup):
    vocab, samples, nm = tiny_setup
    res = train(samples, vocab, cfg(epochs=4), nm, samples[:6])
    ppls = [e.valid_ppl for e in res.epochs]
    assert res.best_epoch == 1 + int(np.argmin(ppls))
    assert perplexity(res.params, samples[:6]) == pytest.approx(min(ppls), abs=1e-12)


def test_train_errors(tiny_setup):
    vocab, samples, nm = tiny_setup
    with pytest.raises(ValueError):
        train(samples, vocab, cfg(), None)
    with pytest.raises(ValueError):
        train([], vocab, cfg(mode="baseline"), None)
    with pytest.raises(ValueError):
        TrainConfig(mode="mixup")
    with pytest.raises(ValueError):
        TrainConfig(rho=2.0)

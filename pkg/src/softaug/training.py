"""Losses, Adam and the alternating augmented/plain training schedule."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ._random import stream
from .augment import AugmentConfig, AugmentationPlan, SoftWordSet, make_plan, plans_digest, replace_most_similar
from .corpus import DialogueSample, Vocabulary
from .neighbors import NeighborModel, import_vectors
from .seq2seq import Seq2SeqParams, init_params, loss_and_grads, make_batch, nll_sum

MODES = ("EA", "baseline", "rep", "no-soft-label", "no-history-aug")


@dataclass
class TrainConfig:
    rho: float = 0.4
    tau: float = 0.4
    k: int = 5
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    mode: str = "EA"
    d: int = 300
    hidden: int = 300
    clip: float = 5.0
    init_scale: float = 0.08
    init_vectors: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        AugmentConfig(self.rho, self.tau, self.k)
        if self.batch_size < 1 or self.epochs < 0 or self.d < 1 or self.hidden < 1:
            raise ValueError("batch_size, d, hidden must be >= 1 and epochs >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    @property
    def augment(self) -> AugmentConfig:
        return AugmentConfig(self.rho, self.tau, self.k)

    @property
    def needs_neighbors(self) -> bool:
        return self.mode != "baseline"

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# losses


def soft_target(soft: SoftWordSet, vocab_size: int) -> np.ndarray:
    """The set's distribution scattered onto the vocabulary axis."""
    out = np.zeros(vocab_size)
    out[list(soft.tokens)] = soft.probs
    return out


def soft_ce_loss(g: np.ndarray, soft: SoftWordSet) -> float:
    """``-sum_j p(c_j) log g(c_j)`` for a soft word set."""
    vals = np.asarray(g)[list(soft.tokens)]
    if np.any(vals <= 0.0):
        raise ValueError("zero probability assigned to a soft-label member")
    return float(-(soft.probs * np.log(vals)).sum())


def hard_ce_loss(g: np.ndarray, target: int) -> float:
    val = float(g[target])
    if val <= 0.0:
        raise ValueError("zero probability assigned to the target token")
    # np.log rather than math.log so a singleton soft set gives the identical value
    return float(-np.log(val))


def sequence_loss(outputs, response: Sequence[int], plan: AugmentationPlan | None) -> float:
    """Mean over response positions: soft CE at augmented positions, hard CE elsewhere."""
    if len(outputs) != len(response):
        raise ValueError("outputs and response lengths differ")
    targets = plan.response_targets if plan is not None else {}
    total = 0.0
    for i, (out, tok) in enumerate(zip(outputs, response)):
        soft = targets.get(i)
        total += soft_ce_loss(out.probs, soft) if soft is not None else hard_ce_loss(out.probs, tok)
    return total / len(response)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        items = params.items() if hasattr(params, "items") else params
        items = list(items)
        return cls({k: np.zeros_like(a) for k, a in items}, {k: np.zeros_like(a) for k, a in items})


def adam_step(params, grads, state: AdamState, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in {name}")
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name, g in grads.items():
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        params[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


# ---------------------------------------------------------------------------
# training loop


@dataclass
class StepRecord:
    step: int
    epoch: int
    augmented: bool
    n_targets: int
    history_targets: int
    plan_digest: str
    loss: float


@dataclass
class EpochRecord:
    epoch: int
    step_count: int
    augmented_steps: int
    train_loss: float
    valid_ppl: float


@dataclass
class TrainResult:
    params: Seq2SeqParams
    final_params: Seq2SeqParams
    adam: AdamState
    best_epoch: int
    epochs: list[EpochRecord] = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)


def replace_tokens(sample: DialogueSample, plan: AugmentationPlan, model: NeighborModel,
                   k: int, tau: float) -> DialogueSample:
    """Hard replacement of every planned position by its most similar neighbor."""
    hist = list(sample.history)
    resp = list(sample.response)
    for i in plan.history_targets:
        hist[i] = replace_most_similar(hist[i], model, k, tau)
    for i in plan.response_targets:
        resp[i] = replace_most_similar(resp[i], model, k, tau)
    return DialogueSample(tuple(hist), tuple(resp))


def _augmented_batch(samples, neighbors, config: TrainConfig, rng):
    plans = [make_plan(s, neighbors, config.augment, rng) for s in samples]
    digest = plans_digest(plans)
    mode = config.mode
    if mode == "EA":
        batch = make_batch(samples, plans, soft_labels=True)
    elif mode == "no-soft-label":
        batch = make_batch(samples, plans, soft_labels=False)
    elif mode == "no-history-aug":
        plans = [p.without_history() for p in plans]
        digest = plans_digest(plans)
        batch = make_batch(samples, plans, soft_labels=True)
    elif mode == "rep":
        batch = make_batch([replace_tokens(s, p, neighbors, config.k, config.tau)
                            for s, p in zip(samples, plans)])
    else:
        raise ValueError(f"mode {mode!r} has no augmented step")
    return batch, plans, digest


def perplexity(params: Seq2SeqParams, samples: Sequence[DialogueSample], batch_size: int = 64) -> float:
    """exp of the token-mean hard cross-entropy, teacher forced, no augmentation."""
    if not samples:
        raise ValueError("perplexity of an empty split")
    total, n_tok = 0.0, 0
    for start in range(0, len(samples), batch_size):
        batch = make_batch(samples[start:start + batch_size])
        total += nll_sum(params, batch)
        n_tok += batch.n_tokens
    return math.exp(total / n_tok)


def initial_params(vocab: Vocabulary, config: TrainConfig) -> Seq2SeqParams:
    rng = stream(config.seed, "init")
    params = init_params(len(vocab), config.d, config.hidden, rng, scale=config.init_scale)
    if config.init_vectors:
        params.blocks["E"] = import_vectors(config.init_vectors, vocab, config.d, rng, scale=config.init_scale)
    return params


def train(samples: Sequence[DialogueSample], vocab: Vocabulary, config: TrainConfig,
          neighbors: NeighborModel | None = None,
          valid: Sequence[DialogueSample] | None = None, log=None) -> TrainResult:
    """Train the encoder-decoder under ``config.mode``.

    Optimizer steps are numbered from 0 across epochs. In every mode except
    ``baseline``, even-numbered steps use augmented batches and odd-numbered
    steps plain ones. The returned ``params`` are those of the epoch with the
    lowest validation perplexity (the last epoch when no validation split is
    given).
    """
    if not samples:
        raise ValueError("no training samples")
    if config.needs_neighbors and neighbors is None:
        raise ValueError(f"mode {config.mode!r} requires a neighbor model")
    if neighbors is not None and neighbors.vocab != vocab:
        raise ValueError("neighbor model was trained on a different vocabulary")

    params = initial_params(vocab, config)
    adam = AdamState.zeros_like(params)
    shuffle_rng = stream(config.seed, "shuffle")
    select_rng = stream(config.seed, "selection")

    result = TrainResult(params.copy(), params, adam, best_epoch=0)
    best_ppl = math.inf
    step = 0
    n_aug = 0
    n = len(samples)
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            chunk = [samples[i] for i in order[start:start + config.batch_size]]
            augmented = config.mode != "baseline" and step % 2 == 0
            if augmented:
                batch, plans, digest = _augmented_batch(chunk, neighbors, config, select_rng)
                n_targets = sum(len(p) for p in plans)
                n_hist = sum(len(p.history_targets) for p in plans)
                n_aug += 1
            else:
                batch, n_targets, n_hist, digest = make_batch(chunk), 0, 0, ""
            loss, grads = loss_and_grads(params, batch)
            clip_global_norm(grads, config.clip)
            adam_step(params.blocks, grads, adam, config.lr, config.beta1, config.beta2, config.eps)
            result.steps.append(StepRecord(step, epoch, augmented, n_targets, n_hist, digest, loss))
            loss_sum += loss
            n_batches += 1
            step += 1
        valid_ppl = perplexity(params, valid) if valid else float("nan")
        rec = EpochRecord(epoch, step, n_aug, loss_sum / n_batches, valid_ppl)
        result.epochs.append(rec)
        if log is not None:
            log(rec)
        if not valid or valid_ppl < best_ppl:
            best_ppl = valid_ppl if valid else best_ppl
            result.params = params.copy()
            result.best_epoch = epoch
    return result

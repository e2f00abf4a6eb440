"""In-domain semantic-neighbor model: word-level CBOW with negative sampling.

The trained input embeddings answer "which words mean roughly the same as
this one" queries; the confidence score of a candidate is its cosine
similarity to the query word.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._random import stream
from .corpus import RESERVED_TOKENS, CorpusSplit, Vocabulary, build_vocab

N_RESERVED = len(RESERVED_TOKENS)


class Neighbor(NamedTuple):
    token: int
    score: float


@dataclass
class NeighborConfig:
    dim: int = 100
    window: int = 4
    epochs: int = 100
    negatives: int = 5
    lr: float = 0.05
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("neighbor dim must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class NeighborModel:
    vocab: Vocabulary
    W_in: np.ndarray
    W_out: np.ndarray
    window: int
    epochs: int = 0
    epoch_losses: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.W_in.shape != self.W_out.shape or self.W_in.shape[0] != len(self.vocab):
            raise ValueError("embedding matrices do not match the vocabulary")
        self._unit = None
        self._cache: dict[tuple[int, int, float], tuple[Neighbor, ...]] = {}

    @property
    def dim(self) -> int:
        return self.W_in.shape[1]

    def unit_rows(self) -> np.ndarray:
        if self._unit is None:
            norms = np.linalg.norm(self.W_in, axis=1, keepdims=True)
            self._unit = np.divide(self.W_in, norms, out=np.zeros_like(self.W_in), where=norms > 0)
        return self._unit

    def cosine(self, a: int, b: int) -> float:
        u = self.unit_rows()
        return float(u[a] @ u[b])


def cbow_instance_loss(W_in, W_out, context, target, negatives):
    """Negative-sampling loss of one CBOW instance and its row gradients.

    Returns ``(loss, grad_in, grad_out)`` where ``grad_in`` has one row per
    context id and ``grad_out`` one row per id in ``[target, *negatives]``
    (repeated ids get separate rows; callers scatter-add them).
    """
    context = np.asarray(context)
    out_ids = np.concatenate([[target], np.asarray(negatives)])
    h = W_in[context].mean(axis=0)
    u = W_out[out_ids]
    s = u @ h
    sign = np.ones(len(out_ids))
    sign[1:] = -1.0
    # loss = -sum log sigmoid(sign * s)
    loss = float(np.sum(np.logaddexp(0.0, -sign * s)))
    g = -sign * _sigmoid(-sign * s)  # d loss / d s
    grad_out = g[:, None] * h[None, :]
    dh = g @ u
    grad_in = np.repeat(dh[None, :] / len(context), len(context), axis=0)
    return loss, grad_in, grad_out


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _training_sentences(corpus: CorpusSplit, vocab: Vocabulary) -> list[np.ndarray]:
    sents = []
    for s in corpus.sentences():
        ids = np.array([i for i in vocab.encode(s) if i >= N_RESERVED], dtype=np.int64)
        if len(ids) >= 2:
            sents.append(ids)
    return sents


def _instances(sents: list[np.ndarray], window: int):
    """All (context ids padded to 2*window, context mask, target) triples."""
    ctx_rows, mask_rows, targets = [], [], []
    width = 2 * window
    for ids in sents:
        n = len(ids)
        for pos in range(n):
            lo, hi = max(0, pos - window), min(n, pos + window + 1)
            ctx = np.concatenate([ids[lo:pos], ids[pos + 1:hi]])
            row = np.zeros(width, dtype=np.int64)
            m = np.zeros(width)
            row[: len(ctx)] = ctx
            m[: len(ctx)] = 1.0
            ctx_rows.append(row)
            mask_rows.append(m)
            targets.append(ids[pos])
    return np.array(ctx_rows), np.array(mask_rows), np.array(targets, dtype=np.int64)


def train_cbow(corpus: CorpusSplit, config: NeighborConfig | None = None, vocab: Vocabulary | None = None,
               **overrides) -> NeighborModel:
    """Train averaged-context CBOW with unigram^0.75 negative sampling.

    Updates are applied in small deterministic mini-batches (scatter-add of
    per-instance gradients); the learning rate decays linearly to 1e-4 of its
    start value over the whole run.
    """
    config = config or NeighborConfig()
    if overrides:
        config = NeighborConfig(**{**config.__dict__, **overrides})
    if vocab is None:
        vocab = build_vocab(corpus)
    sents = _training_sentences(corpus, vocab)
    distinct = {int(t) for s in sents for t in s}
    if len(distinct) < 2:
        raise ValueError("CBOW needs at least 2 distinct non-reserved tokens in multi-token sentences")

    V, d = len(vocab), config.dim
    init_rng = stream(config.seed, "init")
    W_in = init_rng.uniform(-0.5 / d, 0.5 / d, size=(V, d))
    W_in[:N_RESERVED] = 0.0
    W_out = np.zeros((V, d))
    model = NeighborModel(vocab, W_in, W_out, window=config.window)
    if config.epochs == 0:
        return model

    counts = np.zeros(V)
    for s in sents:
        np.add.at(counts, s, 1.0)
    noise = counts ** 0.75
    noise /= noise.sum()
    noise_cdf = np.cumsum(noise)

    ctx, cmask, targets = _instances(sents, config.window)
    n_ctx = cmask.sum(axis=1)
    n_inst = len(targets)
    shuffle_rng = stream(config.seed, "shuffle")
    neg_rng = stream(config.seed, "negatives")
    total_batches = config.epochs * -(-n_inst // config.batch_size)
    K = config.negatives
    labels = np.zeros(K + 1)
    labels[0] = 1.0
    done = 0
    for _ in range(config.epochs):
        order = shuffle_rng.permutation(n_inst)
        epoch_loss = 0.0
        for start in range(0, n_inst, config.batch_size):
            idx = order[start:start + config.batch_size]
            lr = config.lr * max(1e-4, 1.0 - done / total_batches)
            done += 1
            c, m, t = ctx[idx], cmask[idx], targets[idx]
            negs = np.searchsorted(noise_cdf, neg_rng.random((len(idx), K)), side="right")
            negs = np.minimum(negs, V - 1)
            out = np.concatenate([t[:, None], negs], axis=1)
            keep = np.ones_like(out, dtype=float)
            keep[:, 1:] = negs != t[:, None]
            h = np.einsum("bc,bcd->bd", m, W_in[c]) / n_ctx[idx, None]
            u = W_out[out]
            s = np.einsum("bkd,bd->bk", u, h)
            sign = 2.0 * labels - 1.0
            epoch_loss += float(np.sum(keep * np.logaddexp(0.0, -sign * s)))
            g = keep * (_sigmoid(s) - labels)
            dh = np.einsum("bk,bkd->bd", g, u)
            du = g[:, :, None] * h[:, None, :]
            np.add.at(W_out, out.ravel(), -lr * du.reshape(-1, d))
            din = (m / n_ctx[idx, None])[:, :, None] * dh[:, None, :]
            np.add.at(W_in, c.ravel(), -lr * din.reshape(-1, d))
        model.epoch_losses.append(epoch_loss / n_inst)
    model.epochs = config.epochs
    model._unit = None
    return model


def query_neighbors(model: NeighborModel, token: int, k: int, tau: float) -> tuple[Neighbor, ...]:
    """Top-``k`` cosine neighbors of ``token`` with score >= ``tau`` (and > 0).

    Results are sorted by score descending, ties by ascending id; reserved
    tokens and the query itself never appear.
    """
    if token < N_RESERVED:
        raise ValueError(f"cannot query neighbors of reserved token id {token}")
    if not 0 <= token < len(model.vocab):
        raise ValueError(f"token id {token} out of vocabulary")
    key = (token, k, tau)
    hit = model._cache.get(key)
    if hit is not None:
        return hit
    if k <= 0:
        result: tuple[Neighbor, ...] = ()
    else:
        unit = model.unit_rows()
        scores = unit @ unit[token]
        scores = np.minimum(scores, 1.0)
        ids = np.arange(len(scores))
        ok = (ids >= N_RESERVED) & (ids != token) & (scores > 0.0) & (scores >= tau)
        cand = ids[ok]
        order = np.lexsort((cand, -scores[cand]))[:k]
        result = tuple(Neighbor(int(cand[i]), float(scores[cand[i]])) for i in order)
    model._cache[key] = result
    return result


def export_vectors(model: NeighborModel, path: str | Path) -> None:
    """Write the input embeddings in word2vec text format."""
    W = model.W_in
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"{W.shape[0]} {W.shape[1]}\n")
        for tok, row in zip(model.vocab.tokens, W):
            fh.write(tok + " " + " ".join(repr(float(x)) for x in row) + "\n")


def import_vectors(path: str | Path, vocab: Vocabulary, dim: int, rng: np.random.Generator,
                   scale: float = 0.08) -> np.ndarray:
    """Read word2vec text vectors into a ``len(vocab) x dim`` matrix.

    Rows are aligned to ``vocab``; tokens absent from the file are drawn
    uniformly from ``[-scale, scale]`` with ``rng``. Tokens in the file but not
    in ``vocab`` are ignored.
    """
    E = rng.uniform(-scale, scale, size=(len(vocab), dim))
    with Path(path).open(encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("word2vec header must be 'count dim'")
        count, file_dim = int(header[0]), int(header[1])
        if file_dim != dim:
            raise ValueError(f"vector dimension {file_dim} does not match configured {dim}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) == 1 and not parts[0]:
                continue
            if len(parts) != dim + 1:
                raise ValueError(f"line {lineno}: expected {dim} components, got {len(parts) - 1}")
            if parts[0] in vocab:
                E[vocab.id(parts[0])] = np.array(parts[1:], dtype=np.float64)
    return E

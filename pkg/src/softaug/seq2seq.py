"""GRU encoder-decoder with additive attention, exact gradients and beam search.

Every input position is a *mixture* of embedding rows: a plain token is the
mixture ``{token: 1.0}``, an augmented one the soft word set's distribution.
The same representation carries the training targets, so hard and soft
labels share one code path.

GRU cells follow the reset-after-projection convention::

    r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
    z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
    n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
    h' = (1 - z) * n + z * h

with the three gates stacked (r, z, n) along the first axis of each weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .augment import EMPTY_PLAN, AugmentationPlan, SoftWordSet
from .corpus import BOS, EOS, DialogueSample

GRU_PARTS = ("W_ih", "W_hh", "b_ih", "b_hh")
BLOCK_NAMES = (
    "E",
    *(f"enc_f_{p}" for p in GRU_PARTS),
    *(f"enc_b_{p}" for p in GRU_PARTS),
    "bridge_W", "bridge_b",
    "att_W_s", "att_W_a", "att_v",
    *(f"dec_{p}" for p in GRU_PARTS),
    "out_W", "out_b",
)


def block_shapes(vocab_size: int, d: int, h: int) -> dict[str, tuple[int, ...]]:
    V = vocab_size
    shapes = {"E": (V, d)}
    for prefix, n_in in (("enc_f", d), ("enc_b", d), ("dec", d + 2 * h)):
        shapes[f"{prefix}_W_ih"] = (3 * h, n_in)
        shapes[f"{prefix}_W_hh"] = (3 * h, h)
        shapes[f"{prefix}_b_ih"] = (3 * h,)
        shapes[f"{prefix}_b_hh"] = (3 * h,)
    shapes.update({
        "bridge_W": (h, 2 * h), "bridge_b": (h,),
        "att_W_s": (h, h), "att_W_a": (h, 2 * h), "att_v": (h,),
        "out_W": (V, h), "out_b": (V,),
    })
    return {name: shapes[name] for name in BLOCK_NAMES}


class Seq2SeqParams:
    """Named parameter blocks of the encoder-decoder (float64 arrays)."""

    def __init__(self, blocks: dict[str, np.ndarray]):
        self.blocks = {name: np.asarray(blocks[name], dtype=np.float64) for name in BLOCK_NAMES}
        self.validate()

    @property
    def vocab_size(self) -> int:
        return self.blocks["E"].shape[0]

    @property
    def d(self) -> int:
        return self.blocks["E"].shape[1]

    @property
    def h(self) -> int:
        return self.blocks["bridge_b"].shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.blocks[name]

    def __iter__(self):
        return iter(self.blocks)

    def items(self):
        return self.blocks.items()

    def copy(self) -> "Seq2SeqParams":
        return Seq2SeqParams({k: v.copy() for k, v in self.blocks.items()})

    def validate(self) -> None:
        expected = block_shapes(self.vocab_size, self.d, self.h)
        for name, shape in expected.items():
            if self.blocks[name].shape != shape:
                raise ValueError(f"block {name} has shape {self.blocks[name].shape}, expected {shape}")
            if not np.all(np.isfinite(self.blocks[name])):
                raise ValueError(f"block {name} has non-finite entries")


def init_params(vocab_size: int, d: int, h: int, rng: np.random.Generator, scale: float = 0.08,
                embeddings: np.ndarray | None = None) -> Seq2SeqParams:
    blocks = {name: rng.uniform(-scale, scale, size=shape)
              for name, shape in block_shapes(vocab_size, d, h).items()}
    if embeddings is not None:
        if embeddings.shape != (vocab_size, d):
            raise ValueError("initial embeddings do not match (vocab_size, d)")
        blocks["E"] = np.array(embeddings, dtype=np.float64)
    return Seq2SeqParams(blocks)


class StepOutput(NamedTuple):
    logits: np.ndarray
    probs: np.ndarray
    state: np.ndarray


# ---------------------------------------------------------------------------
# batching


@dataclass
class Batch:
    """Padded mixture inputs/targets for a list of samples.

    ``*_ids``/``*_w`` have shape ``(B, T, W)``: position ``t`` of row ``b`` is
    the mixture ``sum_w *_w[b, t, w] * E[*_ids[b, t, w]]``.
    """

    hist_ids: np.ndarray
    hist_w: np.ndarray
    hist_mask: np.ndarray
    dec_ids: np.ndarray
    dec_w: np.ndarray
    tgt_ids: np.ndarray
    tgt_p: np.ndarray
    tgt_mask: np.ndarray

    @property
    def n_tokens(self) -> int:
        return int(self.tgt_mask.sum())


def _fill(rows: list[list[tuple[Sequence[int], Sequence[float]]]], width: int):
    B, T = len(rows), max(len(r) for r in rows)
    ids = np.zeros((B, T, width), dtype=np.int64)
    w = np.zeros((B, T, width))
    mask = np.zeros((B, T))
    for b, row in enumerate(rows):
        for t, (toks, probs) in enumerate(row):
            ids[b, t, :len(toks)] = toks
            w[b, t, :len(toks)] = probs
            mask[b, t] = 1.0
    return ids, w, mask


def _mix(token: int, soft: SoftWordSet | None):
    if soft is None:
        return (token,), (1.0,)
    return soft.tokens, soft.probs


def make_batch(samples: Sequence[DialogueSample], plans: Sequence[AugmentationPlan] | None = None,
               soft_labels: bool = True) -> Batch:
    """Assemble a padded batch; ``plans`` default to empty (plain lookup, hard labels)."""
    if plans is None:
        plans = [EMPTY_PLAN] * len(samples)
    hist_rows, dec_rows, tgt_rows = [], [], []
    width = 1
    for sample, plan in zip(samples, plans):
        ht, rt = plan.history_targets, plan.response_targets
        hist_rows.append([_mix(t, ht.get(i)) for i, t in enumerate(sample.history)])
        dec = [((BOS,), (1.0,))]
        dec += [_mix(t, rt.get(i)) for i, t in enumerate(sample.response[:-1])]
        dec_rows.append(dec)
        if soft_labels:
            tgt_rows.append([_mix(t, rt.get(i)) for i, t in enumerate(sample.response)])
        else:
            tgt_rows.append([((t,), (1.0,)) for t in sample.response])
        for soft in (*ht.values(), *rt.values()):
            width = max(width, len(soft))
    hist_ids, hist_w, hist_mask = _fill(hist_rows, width)
    dec_ids, dec_w, _ = _fill(dec_rows, width)
    tgt_ids, tgt_p, tgt_mask = _fill(tgt_rows, width)
    return Batch(hist_ids, hist_w, hist_mask, dec_ids, dec_w, tgt_ids, tgt_p, tgt_mask)


# ---------------------------------------------------------------------------
# building blocks


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _embed(E, ids, w):
    return (w[..., None] * E[ids]).sum(axis=-2)


def _gru_cell(gi, hp, m, W_hh, b_hh):
    """One GRU update from a precomputed input projection ``gi = x W_ih^T + b_ih``.

    Leading axes broadcast, so a stack of independent cells (``W_hh`` of shape
    ``(D, 3h, h)``, ``hp`` of shape ``(D, B, h)``) advances in one call.
    """
    H = hp.shape[-1]
    gh = hp @ np.swapaxes(W_hh, -1, -2) + b_hh
    r = _sigmoid(gi[..., :H] + gh[..., :H])
    z = _sigmoid(gi[..., H:2 * H] + gh[..., H:2 * H])
    ghn = gh[..., 2 * H:]
    n = np.tanh(gi[..., 2 * H:] + r * ghn)
    hn = (1.0 - z) * n + z * hp
    if m is not None:
        mm = m[..., None]
        hn = mm * hn + (1.0 - mm) * hp
    return hn, (hp, m, r, z, n, ghn)


def _gru_cell_back(dh, cache, W_hh):
    """Returns ``(dgi, dgh, dhp)``; weight gradients are accumulated by the caller."""
    hp, m, r, z, n, ghn = cache
    if m is None:
        dhn = dh
        dhp = dh * z
    else:
        mm = m[..., None]
        dhn = mm * dh
        dhp = dhn * z + (1.0 - mm) * dh
    dn_pre = dhn * (1.0 - z) * (1.0 - n * n)
    dr_pre = dn_pre * ghn * r * (1.0 - r)
    dz_pre = dhn * (hp - n) * z * (1.0 - z)
    dgi = np.concatenate([dr_pre, dz_pre, dn_pre], axis=-1)
    dgh = np.concatenate([dr_pre, dz_pre, dn_pre * r], axis=-1)
    return dgi, dgh, dhp + dgh @ W_hh


def _accumulate_gru(grads, prefix, X, DGI, HP, DGH):
    """Weight gradients from time-stacked inputs/pre-activation gradients (T, B, .)."""
    G = DGI.shape[-1]
    grads[f"{prefix}_W_ih"] += DGI.reshape(-1, G).T @ X.reshape(-1, X.shape[-1])
    grads[f"{prefix}_b_ih"] += DGI.sum(axis=(0, 1))
    grads[f"{prefix}_W_hh"] += DGH.reshape(-1, G).T @ HP.reshape(-1, HP.shape[-1])
    grads[f"{prefix}_b_hh"] += DGH.sum(axis=(0, 1))


def _encode(params, x, mask):
    """x: (B, N, d). Returns annotations (B, N, 2h), decoder init (B, h), cache.

    Both directions advance together: step ``k`` feeds position ``k`` to the
    forward cell and position ``N - 1 - k`` to the backward cell.
    """
    B, N, _ = x.shape
    H = params.h
    GI = np.stack([x @ params["enc_f_W_ih"].T + params["enc_f_b_ih"],
                   (x @ params["enc_b_W_ih"].T + params["enc_b_b_ih"])[:, ::-1]])
    masks = np.stack([mask, mask[:, ::-1]])
    W_hh = np.stack([params["enc_f_W_hh"], params["enc_b_W_hh"]])
    b_hh = np.stack([params["enc_f_b_hh"], params["enc_b_b_hh"]])[:, None, :]
    states = np.zeros((N, 2, B, H))
    h = np.zeros((2, B, H))
    cache = [None] * N
    for k in range(N):
        h, cache[k] = _gru_cell(GI[:, :, k], h, masks[:, :, k], W_hh, b_hh)
        states[k] = h
    ann = np.concatenate([states[:, 0].transpose(1, 0, 2), states[::-1, 1].transpose(1, 0, 2)], axis=2)
    final = np.concatenate([h[0], h[1]], axis=1)
    s0 = np.tanh(final @ params["bridge_W"].T + params["bridge_b"])
    return ann, s0, (cache, W_hh, final, s0)


def _attend(params, s_prev, ann, Ua, amask):
    u = np.tanh((s_prev @ params["att_W_s"].T)[:, None, :] + Ua)
    e = np.where(amask > 0, u @ params["att_v"], -np.inf)
    e = e - e.max(axis=1, keepdims=True)
    a = np.exp(e)
    a /= a.sum(axis=1, keepdims=True)
    ctx = np.matmul(a[:, None, :], ann)[:, 0]
    return ctx, a, u


def _step(params, gi_emb, s_prev, ann, Ua, amask):
    """Decoder step; ``gi_emb`` is the embedding part of the input projection (bias included)."""
    d = params.d
    ctx, a, u = _attend(params, s_prev, ann, Ua, amask)
    gi = gi_emb + ctx @ params["dec_W_ih"][:, d:].T
    s, gcache = _gru_cell(gi, s_prev, None, params["dec_W_hh"], params["dec_b_hh"])
    logits = s @ params["out_W"].T + params["out_b"]
    return logits, s, (s_prev, a, u, ctx, gcache)


def _dec_input_proj(params, emb):
    return emb @ params["dec_W_ih"][:, :params.d].T + params["dec_b_ih"]


def _log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


# ---------------------------------------------------------------------------
# batched forward / backward


def forward_batch(params: Seq2SeqParams, batch: Batch):
    """Teacher-forced pass; returns ``(log_probs (B, M, V), cache)``."""
    E = params["E"]
    x = _embed(E, batch.hist_ids, batch.hist_w)
    ann, s0, enc_cache = _encode(params, x, batch.hist_mask)
    Ua = ann @ params["att_W_a"].T
    dec_x = _embed(E, batch.dec_ids, batch.dec_w)
    GI = _dec_input_proj(params, dec_x)
    M = dec_x.shape[1]
    s = s0
    step_caches, states = [], []
    for t in range(M):
        _, s, c = _step(params, GI[:, t], s, ann, Ua, batch.hist_mask)
        step_caches.append(c)
        states.append(s)
    S = np.stack(states, axis=1)
    logp = _log_softmax(S @ params["out_W"].T + params["out_b"])
    return logp, (x, ann, Ua, enc_cache, dec_x, step_caches, S)


def token_losses(logp: np.ndarray, batch: Batch) -> np.ndarray:
    """Per-position cross-entropy ``-sum_j p_j log g(c_j)`` (zero at padding)."""
    picked = np.take_along_axis(logp, batch.tgt_ids, axis=2)
    return -(batch.tgt_p * picked).sum(axis=2) * batch.tgt_mask


def loss_and_grads(params: Seq2SeqParams, batch: Batch):
    """Token-mean batch loss and its exact gradient for every parameter block."""
    logp, cache = forward_batch(params, batch)
    x, ann, Ua, (enc_cache, enc_W_hh, final, s0), dec_x, step_caches, S = cache
    n_tok = batch.n_tokens
    loss = float(token_losses(logp, batch).sum() / n_tok)
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite loss")

    grads = {name: np.zeros_like(arr) for name, arr in params.items()}
    B, M, V = logp.shape
    H, d = params.h, params.d
    W_s, v = params["att_W_s"], params["att_v"]
    W_hh = params["dec_W_hh"]
    W_ctx = params["dec_W_ih"][:, d:]

    # d loss / d logits = (g - p~) at live positions, divided by the token count
    dZ = np.exp(logp) * batch.tgt_mask[:, :, None]
    bi, ti = np.indices(batch.tgt_ids.shape[:2])
    np.add.at(dZ, (bi[..., None], ti[..., None], batch.tgt_ids), -batch.tgt_p * batch.tgt_mask[..., None])
    dZ /= n_tok
    grads["out_W"] += dZ.reshape(-1, V).T @ S.reshape(-1, H)
    grads["out_b"] += dZ.sum(axis=(0, 1))
    dS = dZ @ params["out_W"]

    dann = np.zeros_like(ann)
    dUa = np.zeros_like(Ua)
    DGI = np.zeros((M, B, 3 * H))
    DGH = np.zeros((M, B, 3 * H))
    HP = np.zeros((M, B, H))
    CTX = np.zeros((M, B, 2 * H))
    ds_next = np.zeros((B, H))
    for t in reversed(range(M)):
        s_prev, a, u, ctx, gcache = step_caches[t]
        dgi, dgh, ds_prev = _gru_cell_back(dS[:, t] + ds_next, gcache, W_hh)
        DGI[t], DGH[t], HP[t], CTX[t] = dgi, dgh, s_prev, ctx
        dctx = dgi @ W_ctx
        dann += a[:, :, None] * dctx[:, None, :]
        da = np.matmul(ann, dctx[:, :, None])[..., 0]
        de = a * (da - (a * da).sum(axis=1, keepdims=True))
        grads["att_v"] += de.reshape(-1) @ u.reshape(-1, H)
        dpre = de[:, :, None] * v * (1.0 - u * u)
        dUa += dpre
        dpre_s = dpre.sum(axis=1)
        grads["att_W_s"] += dpre_s.T @ s_prev
        ds_next = ds_prev + dpre_s @ W_s

    dec_in = np.concatenate([dec_x.transpose(1, 0, 2), CTX], axis=2)
    _accumulate_gru(grads, "dec", dec_in, DGI, HP, DGH)
    ddec_x = (DGI @ params["dec_W_ih"][:, :d]).transpose(1, 0, 2)

    grads["att_W_a"] += dUa.reshape(-1, H).T @ ann.reshape(-1, 2 * H)
    dann += dUa @ params["att_W_a"]

    dpre0 = ds_next * (1.0 - s0 * s0)
    grads["bridge_W"] += dpre0.T @ final
    grads["bridge_b"] += dpre0.sum(axis=0)
    dfinal = dpre0 @ params["bridge_W"]

    N = x.shape[1]
    # step k of the stacked encoder saw position k (forward) and N-1-k (backward)
    dann_steps = np.stack([dann[:, :, :H], dann[:, ::-1, H:]]).transpose(2, 0, 1, 3)
    DGI_e = np.zeros((N, 2, B, 3 * H))
    DGH_e = np.zeros((N, 2, B, 3 * H))
    HP_e = np.zeros((N, 2, B, H))
    dh = np.stack([dfinal[:, :H], dfinal[:, H:]])
    for k in range(N - 1, -1, -1):
        dgi, dgh, dh = _gru_cell_back(dh + dann_steps[k], enc_cache[k], enc_W_hh)
        DGI_e[k], DGH_e[k], HP_e[k] = dgi, dgh, enc_cache[k][0]
    xT = x.transpose(1, 0, 2)
    dx = np.zeros_like(x)
    for j, prefix in enumerate(("enc_f", "enc_b")):
        X = xT if j == 0 else xT[::-1]
        _accumulate_gru(grads, prefix, X, DGI_e[:, j], HP_e[:, j], DGH_e[:, j])
        dxj = (DGI_e[:, j] @ params[f"{prefix}_W_ih"]).transpose(1, 0, 2)
        dx += dxj if j == 0 else dxj[:, ::-1]

    # a mixture row receives p_j times the gradient of the fused vector
    gE = grads["E"]
    for ids, w, dvec in ((batch.hist_ids, batch.hist_w, dx), (batch.dec_ids, batch.dec_w, ddec_x)):
        contrib = w[..., None] * dvec[:, :, None, :]
        np.add.at(gE, ids.ravel(), contrib.reshape(-1, d))
    return loss, grads


def nll_sum(params: Seq2SeqParams, batch: Batch) -> float:
    logp, _ = forward_batch(params, batch)
    return float(token_losses(logp, batch).sum())


# ---------------------------------------------------------------------------
# single-sample API


def embed(item: int | SoftWordSet, params: Seq2SeqParams) -> np.ndarray:
    """Embedding of a plain token id or the fused embedding of a soft word set."""
    if isinstance(item, SoftWordSet):
        return np.asarray(item.probs) @ params["E"][list(item.tokens)]
    return params["E"][int(item)].copy()


def encode(history_embeddings: np.ndarray, params: Seq2SeqParams):
    """Annotations ``(N, 2h)`` and initial decoder state ``(h,)`` for one history."""
    x = np.asarray(history_embeddings, dtype=np.float64)[None]
    ann, s0, _ = _encode(params, x, np.ones(x.shape[:2]))
    return ann[0], s0[0]


def attention_weights(state: np.ndarray, annotations: np.ndarray, params: Seq2SeqParams) -> np.ndarray:
    ann = annotations[None]
    _, a, _ = _attend(params, state[None], ann, ann @ params["att_W_a"].T, np.ones(ann.shape[:2]))
    return a[0]


def decode_step(prev_embedding: np.ndarray, state: np.ndarray, annotations: np.ndarray,
                params: Seq2SeqParams) -> StepOutput:
    ann = annotations[None]
    logits, s, _ = _step(params, _dec_input_proj(params, prev_embedding[None]), state[None], ann,
                         ann @ params["att_W_a"].T, np.ones(ann.shape[:2]))
    z = logits[0]
    return StepOutput(z, np.exp(_log_softmax(z)), s[0])


def forward(sample: DialogueSample, plan: AugmentationPlan | None, params: Seq2SeqParams,
            soft_labels: bool = True) -> list[StepOutput]:
    """Teacher-forced outputs for every response position of one sample."""
    batch = make_batch([sample], [plan or EMPTY_PLAN], soft_labels)
    logp, cache = forward_batch(params, batch)
    S = cache[6][0]
    logits = S @ params["out_W"].T + params["out_b"]
    return [StepOutput(logits[t], np.exp(logp[0, t]), S[t]) for t in range(len(S))]


def backward(sample: DialogueSample, plan: AugmentationPlan | None, params: Seq2SeqParams,
             soft_labels: bool = True) -> dict[str, np.ndarray]:
    """Gradients of the sample's token-mean sequence loss for all blocks."""
    return loss_and_grads(params, make_batch([sample], [plan or EMPTY_PLAN], soft_labels))[1]


# ---------------------------------------------------------------------------
# decoding


def sequence_logprob(history: Sequence[int], tokens: Sequence[int], params: Seq2SeqParams) -> float:
    """Sum of log-probabilities of ``tokens`` given ``history`` (no EOS appended)."""
    E = params["E"]
    ann, s = encode(E[list(history)], params)
    total = 0.0
    prev = BOS
    for tok in tokens:
        out = decode_step(E[prev], s, ann, params)
        total += float(_log_softmax(out.logits)[tok])
        s, prev = out.state, tok
    return total


def beam_search(history: Sequence[int], params: Seq2SeqParams, beam_size: int = 3,
                max_len: int = 20, return_score: bool = False):
    """Length-capped beam search over sum of log-probabilities.

    Expansions reaching EOS retire; at most ``max_len`` tokens (EOS included)
    are generated. The best retired hypothesis wins, ties going to the
    lexicographically smallest id sequence; if nothing retired the best live
    hypothesis is returned. The returned tokens exclude EOS.
    """
    if beam_size < 1 or max_len < 1:
        raise ValueError("beam_size and max_len must be >= 1")
    E = params["E"]
    x = E[list(history)][None]
    amask_1 = np.ones(x.shape[:2])
    ann1, s0, _ = _encode(params, x, amask_1)
    Ua1 = ann1 @ params["att_W_a"].T

    live: list[tuple[float, tuple[int, ...]]] = [(0.0, ())]
    states = s0
    finished: list[tuple[float, tuple[int, ...]]] = []
    for _ in range(max_len):
        L = len(live)
        prev = np.array([seq[-1] if seq else BOS for _, seq in live])
        ann = np.broadcast_to(ann1, (L, *ann1.shape[1:]))
        Ua = np.broadcast_to(Ua1, (L, *Ua1.shape[1:]))
        logits, new_states, _ = _step(params, _dec_input_proj(params, E[prev]), states, ann, Ua,
                                      np.ones((L, ann1.shape[1])))
        total = np.array([sc for sc, _ in live])[:, None] + _log_softmax(logits)
        flat = total.ravel()
        if beam_size < flat.size:
            cut = np.partition(flat, flat.size - beam_size)[flat.size - beam_size]
            idx = np.flatnonzero(flat >= cut)
        else:
            idx = np.arange(flat.size)
        V = total.shape[1]
        cands = sorted(((-float(flat[i]), live[i // V][1] + (int(i % V),), int(i // V)) for i in idx))
        cands = cands[:beam_size]
        next_live, keep_rows = [], []
        for neg, seq, row in cands:
            if seq[-1] == EOS:
                finished.append((-neg, seq))
            else:
                next_live.append((-neg, seq))
                keep_rows.append(row)
        if not next_live:
            break
        live = next_live
        states = new_states[keep_rows]
    pool = finished or live
    score, seq = min(pool, key=lambda c: (-c[0], c[1]))
    tokens = list(seq[:-1]) if seq and seq[-1] == EOS else list(seq)
    return (tokens, score) if return_score else tokens


def greedy_decode(history: Sequence[int], params: Seq2SeqParams, max_len: int = 20) -> list[int]:
    return beam_search(history, params, beam_size=1, max_len=max_len)

"""Independent reference implementations used as test oracles.

These are written without the package's helpers: plain loops over lists,
no Counter, no shared n-gram code.
"""

import math

import numpy as np


def grams(seq, n):
    return [tuple(seq[i:i + n]) for i in range(len(seq) - n + 1)]


def count(items):
    table = {}
    for it in items:
        table[it] = table.get(it, 0) + 1
    return table


def dist(responses, n):
    pooled = [g for r in responses for g in grams(r, n)]
    return len(set(pooled)) / len(pooled) if pooled else 0.0


def ent(responses, n):
    table = count(g for r in responses for g in grams(r, n))
    total = sum(table.values())
    return -sum(v / total * math.log(v / total) for v in table.values()) if total else 0.0


def sen(responses, n):
    vals = []
    for r in responses:
        g = grams(r, n)
        vals.append(len(set(g)) / len(g) if g else 1.0)
    return sum(vals) / len(vals)


def clipped(cand, ref, n):
    rc = count(grams(ref, n))
    hits = 0
    for g, k in count(grams(cand, n)).items():
        hits += min(k, rc.get(g, 0))
    return hits


def bleu(cands, refs):
    logs = 0.0
    for n in range(1, 5):
        m = sum(clipped(c, r, n) for c, r in zip(cands, refs))
        t = sum(max(0, len(c) - n + 1) for c in cands)
        logs += math.log(m / t if m else 1 / (t + 1))
    c = sum(map(len, cands))
    r = sum(map(len, refs))
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(logs / 4)


def nist(cands, refs):
    table = count(g for r in refs for n in range(1, 5) for g in grams(r, n))
    words = sum(map(len, refs))
    total = 0.0
    for n in range(1, 5):
        num = 0.0
        den = 0
        for c, r in zip(cands, refs):
            rc = count(grams(r, n))
            for g, k in count(grams(c, n)).items():
                h = min(k, rc.get(g, 0))
                if h:
                    parent = words if n == 1 else table[g[:-1]]
                    num += h * math.log2(parent / table[g])
            den += max(0, len(c) - n + 1)
        if den:
            total += num / den
    ratio = min(1.0, sum(map(len, cands)) / words)
    beta = math.log(0.5) / math.log(1.5) ** 2
    return total / 4 * math.exp(beta * math.log(ratio) ** 2)


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def _sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def gru(x, h, W_ih, W_hh, b_ih, b_hh):
    """Scalar-loop GRU cell (gates stacked r, z, n)."""
    H = len(h)
    gi = [sum(W_ih[j][i] * x[i] for i in range(len(x))) + b_ih[j] for j in range(3 * H)]
    gh = [sum(W_hh[j][i] * h[i] for i in range(H)) + b_hh[j] for j in range(3 * H)]
    out = []
    for k in range(H):
        r = _sig(gi[k] + gh[k])
        z = _sig(gi[H + k] + gh[H + k])
        n = math.tanh(gi[2 * H + k] + r * gh[2 * H + k])
        out.append((1 - z) * n + z * h[k])
    return out


def seq2seq_logits(P, hist_emb, dec_emb):
    """Teacher-forced logits for one sample, written with plain Python loops.

    ``P`` maps block names to nested lists; ``hist_emb``/``dec_emb`` are lists of
    input vectors.
    """
    H = len(P["enc_f_b_hh"]) // 3
    f = [0.0] * H
    fwd = []
    for x in hist_emb:
        f = gru(x, f, P["enc_f_W_ih"], P["enc_f_W_hh"], P["enc_f_b_ih"], P["enc_f_b_hh"])
        fwd.append(f)
    b = [0.0] * H
    bwd = [None] * len(hist_emb)
    for i in reversed(range(len(hist_emb))):
        b = gru(hist_emb[i], b, P["enc_b_W_ih"], P["enc_b_W_hh"], P["enc_b_b_ih"], P["enc_b_b_hh"])
        bwd[i] = b
    ann = [fwd[i] + bwd[i] for i in range(len(hist_emb))]
    final = fwd[-1] + bwd[0]
    s = [math.tanh(sum(P["bridge_W"][j][i] * final[i] for i in range(2 * H)) + P["bridge_b"][j]) for j in range(H)]
    out = []
    for x in dec_emb:
        scores = []
        for a in ann:
            u = [math.tanh(sum(P["att_W_s"][j][i] * s[i] for i in range(H))
                           + sum(P["att_W_a"][j][i] * a[i] for i in range(2 * H))) for j in range(H)]
            scores.append(sum(P["att_v"][j] * u[j] for j in range(H)))
        top = max(scores)
        w = [math.exp(e - top) for e in scores]
        w = [v / sum(w) for v in w]
        ctx = [sum(w[n] * ann[n][i] for n in range(len(ann))) for i in range(2 * H)]
        s = gru(list(x) + ctx, s, P["dec_W_ih"], P["dec_W_hh"], P["dec_b_ih"], P["dec_b_hh"])
        out.append([sum(P["out_W"][v][i] * s[i] for i in range(H)) + P["out_b"][v] for v in range(len(P["out_b"]))])
    return out


def best_sequence(score_fn, vocab_size, eos, max_len):
    """Exhaustive argmax over every EOS-terminated sequence of at most ``max_len`` tokens."""
    import itertools
    best = None
    for n in range(max_len):
        for body in itertools.product([t for t in range(vocab_size) if t != eos], repeat=n):
            seq = tuple(body) + (eos,)
            key = (-score_fn(seq), seq)
            if best is None or key < best:
                best = key
    return list(best[1][:-1]), -best[0]

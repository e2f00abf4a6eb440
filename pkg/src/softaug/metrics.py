"""N-gram accuracy (BLEU, NIST-4) and diversity (Ent-n, Dist-n, Sen-n) metrics.

All functions take token sequences (lists of strings or ids). Entropies are
in nats. Dist-n and Sen-n are ratios in [0, 1] (not percentages).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Hashable, Sequence

Tokens = Sequence[Hashable]

NIST_BETA = math.log(0.5) / math.log(1.5) ** 2


def ngrams(tokens: Tokens, n: int) -> list[tuple]:
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def ngram_counts(responses: Sequence[Tokens], n: int) -> Counter:
    if n < 1:
        raise ValueError("n must be >= 1")
    counts: Counter = Counter()
    for r in responses:
        counts.update(ngrams(r, n))
    return counts


def dist_n(responses: Sequence[Tokens], n: int) -> float:
    """Distinct n-grams over all n-grams, pooled across responses."""
    counts = ngram_counts(responses, n)
    total = sum(counts.values())
    return len(counts) / total if total else 0.0


def ent_n(responses: Sequence[Tokens], n: int) -> float:
    """Entropy (nats) of the pooled n-gram frequency distribution."""
    counts = ngram_counts(responses, n)
    total = sum(counts.values())
    if not total:
        return 0.0
    return 0.0 - sum(c / total * math.log(c / total) for c in counts.values())


def sen_n(responses: Sequence[Tokens], n: int) -> float:
    """Mean per-sentence Dist-n; sentences with no n-gram count as fully distinct."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not responses:
        return 0.0
    vals = []
    for r in responses:
        grams = ngrams(r, n)
        vals.append(len(set(grams)) / len(grams) if grams else 1.0)
    return sum(vals) / len(vals)


def avg_len(responses: Sequence[Tokens]) -> float:
    if not responses:
        raise ValueError("average length of an empty response list")
    return sum(len(r) for r in responses) / len(responses)


def _check_aligned(candidates, references):
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates but {len(references)} references")
    if not references:
        raise ValueError("no references")


def bleu_components(candidates: Sequence[Tokens], references: Sequence[Tokens], max_n: int = 4):
    """Clipped matches and totals per order, plus candidate and reference lengths."""
    _check_aligned(candidates, references)
    matches = [0] * max_n
    totals = [0] * max_n
    for cand, ref in zip(candidates, references):
        for n in range(1, max_n + 1):
            c = Counter(ngrams(cand, n))
            r = Counter(ngrams(ref, n))
            matches[n - 1] += sum(min(k, r[g]) for g, k in c.items())
            totals[n - 1] += max(len(cand) - n + 1, 0)
    cand_len = sum(len(c) for c in candidates)
    ref_len = sum(len(r) for r in references)
    return matches, totals, cand_len, ref_len


def bleu(candidates: Sequence[Tokens], references: Sequence[Tokens], max_n: int = 4) -> float:
    """Corpus BLEU-4 with brevity penalty.

    Orders with zero clipped matches use the add-one precision
    ``1 / (total + 1)``; orders with at least one match are unsmoothed, so an
    exact self-match scores 1.0.
    """
    matches, totals, c, r = bleu_components(candidates, references, max_n)
    if c == 0:
        return 0.0
    log_p = 0.0
    for m, t in zip(matches, totals):
        p = m / t if m > 0 else 1.0 / (t + 1)
        log_p += math.log(p)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_p / max_n)


def nist_info(references: Sequence[Tokens], max_n: int = 4) -> dict[tuple, float]:
    """Information weight ``log2(count(prefix) / count(ngram))`` from reference counts."""
    counts: Counter = Counter()
    for ref in references:
        for n in range(1, max_n + 1):
            counts.update(ngrams(ref, n))
    n_words = sum(len(r) for r in references)
    info = {}
    for g, c in counts.items():
        parent = n_words if len(g) == 1 else counts[g[:-1]]
        info[g] = math.log2(parent / c)
    return info


def nist_components(candidates: Sequence[Tokens], references: Sequence[Tokens], max_n: int = 4):
    """Per order: summed information of clipped matches, and candidate n-gram totals."""
    _check_aligned(candidates, references)
    info = nist_info(references, max_n)
    numer = [0.0] * max_n
    denom = [0] * max_n
    for cand, ref in zip(candidates, references):
        for n in range(1, max_n + 1):
            c = Counter(ngrams(cand, n))
            r = Counter(ngrams(ref, n))
            for g, k in c.items():
                hit = min(k, r[g])
                if hit:
                    numer[n - 1] += hit * info[g]
            denom[n - 1] += max(len(cand) - n + 1, 0)
    return numer, denom


def nist4(candidates: Sequence[Tokens], references: Sequence[Tokens], max_n: int = 4) -> float:
    """NIST with reference-derived information weights, averaged over orders 1..4.

    The brevity factor is ``exp(beta * log(min(1, L_sys / L_ref))**2)`` with
    beta chosen so that a length ratio of 2/3 gives 0.5.
    """
    numer, denom = nist_components(candidates, references, max_n)
    sys_len = sum(len(c) for c in candidates)
    ref_len = sum(len(r) for r in references)
    if sys_len == 0 or ref_len == 0:
        return 0.0
    score = sum(nu / de for nu, de in zip(numer, denom) if de) / max_n
    ratio = min(1.0, sys_len / ref_len)
    return score * math.exp(NIST_BETA * math.log(ratio) ** 2)


@dataclass
class MetricsReport:
    bleu: float
    nist4: float
    ent_1: float
    ent_2: float
    ent_3: float
    dist_1: float
    dist_2: float
    dist_3: float
    sen_1: float
    sen_2: float
    sen_3: float
    avg_len: float
    ppl: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        """Two-line plain-text table; BLEU, Dist and Sen shown in percent."""
        cols = [("PPL", self.ppl), ("avg.len", self.avg_len), ("BLEU", 100 * self.bleu),
                ("N-4", self.nist4), ("Ent-1", self.ent_1), ("Ent-2", self.ent_2), ("Ent-3", self.ent_3),
                ("Dist-1", 100 * self.dist_1), ("Dist-2", 100 * self.dist_2), ("Dist-3", 100 * self.dist_3),
                ("Sen-1", 100 * self.sen_1), ("Sen-2", 100 * self.sen_2), ("Sen-3", 100 * self.sen_3)]
        head = " ".join(f"{name:>8}" for name, _ in cols)
        vals = " ".join(f"{'-':>8}" if v is None else f"{v:8.3f}" for _, v in cols)
        return head + "\n" + vals


def evaluate(candidates: Sequence[Tokens], references: Sequence[Tokens], ppl: float | None = None) -> MetricsReport:
    if not candidates:
        raise ValueError("no generated responses to evaluate")
    _check_aligned(candidates, references)
    return MetricsReport(
        bleu=bleu(candidates, references),
        nist4=nist4(candidates, references),
        ent_1=ent_n(candidates, 1), ent_2=ent_n(candidates, 2), ent_3=ent_n(candidates, 3),
        dist_1=dist_n(candidates, 1), dist_2=dist_n(candidates, 2), dist_3=dist_n(candidates, 3),
        sen_1=sen_n(candidates, 1), sen_2=sen_n(candidates, 2), sen_3=sen_n(candidates, 3),
        avg_len=avg_len(candidates),
        ppl=ppl,
    )

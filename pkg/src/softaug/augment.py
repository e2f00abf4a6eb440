"""Soft embedding augmentation: target selection, soft word sets, fusion, plans."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import DialogueSample, Vocabulary
from .neighbors import N_RESERVED, NeighborModel, query_neighbors

ARTICLES = frozenset({"a", "an", "the"})
PREPOSITIONS = frozenset({
    "in", "on", "at", "to", "of", "for", "with", "from", "by",
    "about", "as", "into", "over", "under", "up", "down",
})


def is_punctuation(token: str) -> bool:
    return not any(ch.isalnum() for ch in token)


def is_eligible(token: int, vocab: Vocabulary) -> bool:
    """Whether a token may be augmented (not reserved/punctuation/article/preposition)."""
    if token < N_RESERVED:
        return False
    word = vocab.token(token)
    return not (is_punctuation(word) or word in ARTICLES or word in PREPOSITIONS)


@dataclass(frozen=True)
class SoftWordSet:
    """The original token (score 1) followed by its filtered neighbors."""

    tokens: tuple[int, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        if not self.tokens or len(self.tokens) != len(self.scores):
            raise ValueError("soft word set needs matching non-empty tokens and scores")
        if self.scores[0] != 1.0:
            raise ValueError("the original token must carry score 1")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate tokens in soft word set")
        if any(not s > 0.0 for s in self.scores):
            raise ValueError("scores must be positive")

    @classmethod
    def singleton(cls, token: int) -> "SoftWordSet":
        return cls((int(token),), (1.0,))

    @property
    def original(self) -> int:
        return self.tokens[0]

    @property
    def probs(self) -> np.ndarray:
        s = np.asarray(self.scores, dtype=np.float64)
        return s / s.sum()

    def __len__(self) -> int:
        return len(self.tokens)

    def to_json(self) -> dict:
        return {"tokens": list(self.tokens), "scores": list(self.scores)}


def build_soft_word_set(token: int, model: NeighborModel, k: int, tau: float) -> SoftWordSet:
    neighbors = query_neighbors(model, token, k, tau)
    return SoftWordSet(
        (int(token), *(n.token for n in neighbors)),
        (1.0, *(n.score for n in neighbors)),
    )


def fuse_embedding(soft: SoftWordSet, E: np.ndarray) -> np.ndarray:
    """Probability-weighted mixture of the set's embedding rows."""
    p = soft.probs
    if len(p) == 1:
        return E[soft.tokens[0]].copy()
    return p @ E[list(soft.tokens)]


def replace_most_similar(token: int, model: NeighborModel, k: int, tau: float) -> int:
    neighbors = query_neighbors(model, token, k, tau)
    return neighbors[0].token if neighbors else int(token)


def select_targets(sample: DialogueSample, rho: float, rng: np.random.Generator,
                   vocab: Vocabulary) -> tuple[list[int], list[int]]:
    """Positions in history and response chosen for augmentation.

    One uniform draw per eligible position, history first; each is kept with
    probability ``rho``.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    chosen = []
    for seq in (sample.history, sample.response):
        eligible = [i for i, t in enumerate(seq) if is_eligible(t, vocab)]
        draws = rng.random(len(eligible))
        chosen.append([i for i, u in zip(eligible, draws) if u < rho])
    return chosen[0], chosen[1]


@dataclass(frozen=True)
class AugmentConfig:
    rho: float = 0.4
    tau: float = 0.4
    k: int = 5

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.k < 0:
            raise ValueError("k must be >= 0")


@dataclass(frozen=True)
class AugmentationPlan:
    """Selected positions of one sample, each bound to its soft word set."""

    history_targets: dict[int, SoftWordSet] = field(default_factory=dict)
    response_targets: dict[int, SoftWordSet] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not self.history_targets and not self.response_targets

    def __len__(self) -> int:
        return len(self.history_targets) + len(self.response_targets)

    def without_history(self) -> "AugmentationPlan":
        return AugmentationPlan({}, dict(self.response_targets))

    def to_json(self) -> dict:
        return {
            "history": [[pos, s.to_json()] for pos, s in sorted(self.history_targets.items())],
            "response": [[pos, s.to_json()] for pos, s in sorted(self.response_targets.items())],
        }

    def serialize(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode("utf-8")


EMPTY_PLAN = AugmentationPlan()


def make_plan(sample: DialogueSample, model: NeighborModel, config: AugmentConfig,
              rng: np.random.Generator) -> AugmentationPlan:
    hist_pos, resp_pos = select_targets(sample, config.rho, rng, model.vocab)
    return AugmentationPlan(
        {i: build_soft_word_set(sample.history[i], model, config.k, config.tau) for i in hist_pos},
        {i: build_soft_word_set(sample.response[i], model, config.k, config.tau) for i in resp_pos},
    )


def plans_digest(plans) -> str:
    h = hashlib.sha256()
    for plan in plans:
        h.update(plan.serialize())
        h.update(b"\n")
    return h.hexdigest()


def format_plan(sample: DialogueSample, plan: AugmentationPlan, vocab: Vocabulary) -> str:
    """Human-readable dump: per target the original token, candidates, scores and p."""
    if plan.empty:
        return "  no targets"
    lines = []
    for side, seq, targets in (("H", sample.history, plan.history_targets),
                               ("R", sample.response, plan.response_targets)):
        for pos, soft in sorted(targets.items()):
            lines.append(f"  {side}[{pos}] {vocab.token(seq[pos])}")
            for tok, s, p in zip(soft.tokens, soft.scores, soft.probs):
                lines.append(f"      {vocab.token(tok):<16} s={s:.6f} p={p:.6f}")
    return "\n".join(lines)

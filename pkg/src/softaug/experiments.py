"""Train / decode / evaluate runners shared by the CLI, demos and acceptance tests."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .corpus import EOS, CorpusSplit, DialogueSample, Vocabulary, build_vocab
from .metrics import MetricsReport, evaluate
from .neighbors import NeighborConfig, NeighborModel, train_cbow
from .seq2seq import Seq2SeqParams, beam_search
from .training import MODES, TrainConfig, TrainResult, perplexity, train

log = logging.getLogger(__name__)


@dataclass
class Data:
    """Encoded splits sharing one vocabulary built from the training split."""

    vocab: Vocabulary
    train: list[DialogueSample]
    valid: list[DialogueSample]
    test: list[DialogueSample]
    references: list[list[str]]

    @classmethod
    def from_splits(cls, train_split: CorpusSplit, valid_split: CorpusSplit | None,
                    test_split: CorpusSplit | None, min_count: int = 1) -> "Data":
        vocab = build_vocab(train_split, min_count)
        return cls(
            vocab,
            train_split.encode(vocab),
            valid_split.encode(vocab) if valid_split else [],
            test_split.encode(vocab) if test_split else [],
            test_split.references() if test_split else [],
        )


@dataclass
class RunResult:
    config: TrainConfig
    train: TrainResult
    responses: list[list[str]]
    metrics: MetricsReport | None
    valid_ppl: float | None


def generate(params: Seq2SeqParams, samples: Sequence[DialogueSample], vocab: Vocabulary,
             beam: int = 3, max_len: int = 20) -> list[list[str]]:
    out = []
    for s in samples:
        ids = beam_search(s.history, params, beam, max_len)
        out.append([vocab.token(i) for i in ids if i != EOS])
    return out


def run(data: Data, config: TrainConfig, neighbors: NeighborModel | None = None,
        beam: int = 3, max_len: int = 20) -> RunResult:
    """Train under ``config``, decode the test split and score it."""
    log.info("training mode=%s rho=%.2f seed=%d", config.mode, config.rho, config.seed)
    result = train(data.train, data.vocab, config, neighbors if config.needs_neighbors else None,
                   data.valid or None)
    valid_ppl = perplexity(result.params, data.valid) if data.valid else None
    responses, metrics = [], None
    if data.test:
        responses = generate(result.params, data.test, data.vocab, beam, max_len)
        metrics = evaluate(responses, data.references, ppl=valid_ppl)
    return RunResult(config, result, responses, metrics, valid_ppl)


def train_neighbors(data: Data, config: NeighborConfig, split: CorpusSplit) -> NeighborModel:
    return train_cbow(split, config, vocab=data.vocab)


def sweep_rho(data: Data, config: TrainConfig, neighbors: NeighborModel, rhos: Sequence[float],
              beam: int = 3, max_len: int = 20) -> list[dict]:
    """One EA run per rho; rows carry BLEU, Dist-2 and Sen-2 on the test split."""
    rows = []
    for rho in rhos:
        res = run(data, replace(config, rho=float(rho)), neighbors, beam, max_len)
        m = res.metrics
        rows.append({"rho": float(rho), "bleu": m.bleu, "dist2": m.dist_2, "sen2": m.sen_2})
    return rows


def ablation(data: Data, config: TrainConfig, neighbors: NeighborModel,
             beam: int = 3, max_len: int = 20, modes: Sequence[str] = MODES) -> dict[str, RunResult]:
    """Every mode trained from the same seed and hyperparameters."""
    return {mode: run(data, replace(config, mode=mode), neighbors, beam, max_len) for mode in modes}


def write_rows(path: str | Path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

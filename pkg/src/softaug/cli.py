"""Command-line entry point: ``softaug <command>`` (or ``python -m softaug``).

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ._random import stream
from .augment import format_plan, make_plan
from .checkpoint import (CheckpointError, RunManifest, load_neighbor_model, load_seq2seq,
                         save_neighbor_model, save_seq2seq)
from .config import ConfigError, RunConfig, load_config
from .corpus import CorpusFormatError, build_vocab, load_corpus, load_generated, save_generated
from .experiments import Data, ablation, generate, sweep_rho, write_rows
from .metrics import evaluate
from .neighbors import export_vectors, train_cbow
from .training import MODES, perplexity, train

log = logging.getLogger("softaug")


class UsageError(Exception):
    pass


def _existing(path: str | None, what: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _config(args) -> RunConfig:
    return load_config(args.config, args.set or ())


def _manifest(cfg: RunConfig, vocab, paths: dict, out: Path | None, **extra) -> RunManifest:
    return RunManifest(config=cfg.to_dict(), seed=cfg.seed, vocab_hash=vocab.digest(),
                       corpus_paths={k: str(v) for k, v in paths.items() if v is not None},
                       mode=cfg.mode, output_dir=str(out) if out else None, extra=extra)


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------


def cmd_train_neighbors(args) -> int:
    cfg = _config(args)
    corpus_path = _existing(args.corpus, "corpus")
    split = load_corpus(corpus_path)
    vocab = build_vocab(split, cfg.min_count)
    model = train_cbow(split, cfg.neighbor_config(), vocab=vocab)
    out = _outdir(args.out)
    manifest = _manifest(cfg, vocab, {"train": corpus_path}, out)
    save_neighbor_model(model, out / "neighbors.ckpt", manifest.to_dict(with_output_dir=False))
    manifest.write(out / "manifest.json")
    if args.export_vectors:
        export_vectors(model, out / "vectors.txt")
    log.info("neighbor model: %d tokens, final epoch loss %.4f", len(vocab),
             model.epoch_losses[-1] if model.epoch_losses else float("nan"))
    return 0


def _write_train_logs(out: Path, result) -> None:
    with (out / "train_log.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "step_count", "augmented_steps", "train_loss", "valid_ppl"])
        for r in result.epochs:
            w.writerow([r.epoch, r.step_count, r.augmented_steps, repr(r.train_loss), repr(r.valid_ppl)])
    with (out / "steps.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "epoch", "augmented", "n_targets", "history_targets", "plan_digest", "loss"])
        for s in result.steps:
            w.writerow([s.step, s.epoch, int(s.augmented), s.n_targets, s.history_targets, s.plan_digest, repr(s.loss)])


def cmd_train(args) -> int:
    cfg = _config(args)
    corpus_path = _existing(args.corpus, "corpus")
    valid_path = _existing(args.valid, "validation corpus")
    neighbor_path = _existing(args.neighbors, "neighbor checkpoint")
    if cfg.mode != "baseline" and neighbor_path is None:
        raise ConfigError(f"mode {cfg.mode} needs --neighbors")
    split = load_corpus(corpus_path)
    vocab = build_vocab(split, cfg.min_count)
    neighbors = load_neighbor_model(neighbor_path, vocab) if neighbor_path and cfg.mode != "baseline" else None
    samples = split.encode(vocab)
    valid = load_corpus(valid_path, tag="valid").encode(vocab) if valid_path else None
    result = train(samples, vocab, cfg.train_config(), neighbors, valid,
                   log=lambda r: log.info("epoch %d loss %.4f valid ppl %.3f", r.epoch, r.train_loss, r.valid_ppl))
    out = _outdir(args.out)
    manifest = _manifest(cfg, vocab, {"train": corpus_path, "valid": valid_path, "neighbors": neighbor_path}, out,
                         best_epoch=result.best_epoch)
    save_seq2seq(result.params, vocab, out / "model.ckpt", manifest.to_dict(with_output_dir=False),
                 adam=result.adam, meta={"best_epoch": result.best_epoch})
    _write_train_logs(out, result)
    manifest.write(out / "manifest.json")
    return 0


def cmd_generate(args) -> int:
    model_path = _existing(args.model, "model checkpoint")
    corpus_path = _existing(args.corpus, "corpus")
    params, vocab, _, ck = load_seq2seq(model_path)
    cfg = ck.manifest.get("config", {})
    beam = args.beam if args.beam is not None else int(cfg.get("beam", 3))
    max_len = args.max_len if args.max_len is not None else int(cfg.get("max_len", 20))
    samples = load_corpus(corpus_path, tag="test").encode(vocab)
    responses = generate(params, samples, vocab, beam, max_len)
    save_generated(args.out, responses)
    return 0


def cmd_evaluate(args) -> int:
    responses_path = _existing(args.responses, "responses file")
    corpus_path = _existing(args.corpus, "corpus")
    responses = load_generated(responses_path)
    if not responses:
        raise UsageError(f"responses file is empty: {responses_path}")
    split = load_corpus(corpus_path, tag="test")
    if len(responses) != len(split):
        raise UsageError(f"{len(responses)} responses but {len(split)} corpus lines")
    ppl = None
    if args.model:
        params, vocab, _, _ = load_seq2seq(_existing(args.model, "model checkpoint"))
        ppl = perplexity(params, split.encode(vocab))
    report = evaluate(responses, split.references(), ppl=ppl)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print("# entropies in nats; dist/sen/bleu as ratios in JSON, percent in the table")
    print(report.table())
    print(text)
    return 0


def cmd_augment_preview(args) -> int:
    cfg = _config(args)
    neighbors = load_neighbor_model(_existing(args.neighbors, "neighbor checkpoint"))
    split = load_corpus(_existing(args.corpus, "corpus"))
    vocab = neighbors.vocab
    rng = stream(cfg.seed, "selection")
    for i, sample in enumerate(split.encode(vocab)[: args.n_samples]):
        plan = make_plan(sample, neighbors, cfg.augment_config(), rng)
        print(f"sample {i}")
        print("  H: " + " ".join(vocab.decode(sample.history)))
        print("  R: " + " ".join(vocab.decode(sample.response)))
        print(format_plan(sample, plan, vocab))
    return 0


def _experiment_inputs(args, cfg: RunConfig):
    train_path = _existing(args.corpus, "corpus")
    valid_path = _existing(args.valid, "validation corpus")
    test_path = _existing(args.test, "test corpus")
    train_split = load_corpus(train_path)
    data = Data.from_splits(train_split, load_corpus(valid_path, "valid") if valid_path else None,
                            load_corpus(test_path, "test"), cfg.min_count)
    if args.neighbors:
        neighbors = load_neighbor_model(_existing(args.neighbors, "neighbor checkpoint"), data.vocab)
    else:
        neighbors = train_cbow(train_split, cfg.neighbor_config(), vocab=data.vocab)
    paths = {"train": train_path, "valid": valid_path, "test": test_path, "neighbors": args.neighbors}
    return data, neighbors, paths


def cmd_sweep_rho(args) -> int:
    cfg = _config(args)
    try:
        rhos = [float(x) for x in args.rhos.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --rhos list {args.rhos!r}") from None
    if not rhos:
        raise UsageError("empty --rhos list")
    data, neighbors, paths = _experiment_inputs(args, cfg)
    train_cfg = cfg.train_config()
    if train_cfg.mode == "baseline":
        raise ConfigError("sweep-rho trains augmented models; use a mode other than baseline")
    rows = sweep_rho(data, train_cfg, neighbors, rhos, cfg.beam, cfg.max_len)
    out = _outdir(args.out)
    write_rows(out / "sweep.csv", rows)
    _manifest(cfg, data.vocab, paths, out, rhos=rhos).write(out / "manifest.json")
    for row in rows:
        print(f"rho={row['rho']:.2f} bleu={row['bleu']:.4f} dist2={row['dist2']:.4f} sen2={row['sen2']:.4f}")
    return 0


def cmd_ablation(args) -> int:
    cfg = _config(args)
    data, neighbors, paths = _experiment_inputs(args, cfg)
    results = ablation(data, cfg.train_config(), neighbors, cfg.beam, cfg.max_len)
    rows, modes_log = [], {}
    for mode, res in results.items():
        rows.append({"mode": mode, **res.metrics.to_dict()})
        aug = [s for s in res.train.steps if s.augmented]
        modes_log[mode] = {
            "best_epoch": res.train.best_epoch,
            "augmented_steps": [s.step for s in aug],
            "plan_digests": [s.plan_digest for s in aug],
            "history_targets": sum(s.history_targets for s in aug),
            "response_targets": sum(s.n_targets - s.history_targets for s in aug),
        }
    out = _outdir(args.out)
    write_rows(out / "ablation.csv", rows)
    table = "\n".join(f"{mode:<15}" + res.metrics.table().splitlines()[1] for mode, res in results.items())
    (out / "ablation.txt").write_text(" " * 15 + next(iter(results.values())).metrics.table().splitlines()[0]
                                      + "\n" + table + "\n", encoding="utf-8")
    _manifest(cfg, data.vocab, paths, out, shared_seed=cfg.seed, modes=modes_log).write(out / "manifest.json")
    print((out / "ablation.txt").read_text(encoding="utf-8"), end="")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softaug", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, config=True):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        if config:
            p.add_argument("--config", help="key = value config file")
            p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        return p

    p = add("train-neighbors", cmd_train_neighbors, "train the CBOW neighbor model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--export-vectors", action="store_true", help="also write vectors.txt (word2vec text)")

    p = add("train", cmd_train, "train the dialogue model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--valid")
    p.add_argument("--neighbors", help="neighbor checkpoint (required unless mode=baseline)")
    p.add_argument("--out", required=True)

    p = add("generate", cmd_generate, "beam-search responses for a corpus", config=False)
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int)
    p.add_argument("--max-len", type=int)

    p = add("evaluate", cmd_evaluate, "score generated responses", config=False)
    p.add_argument("--responses", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", help="also report validation-style perplexity on the corpus")
    p.add_argument("--out")

    p = add("augment-preview", cmd_augment_preview, "print augmentation plans")
    p.add_argument("--neighbors", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--n-samples", type=int, default=5)

    for name, func, help_ in (("sweep-rho", cmd_sweep_rho, "train EA models over a list of rho values"),
                              ("ablation", cmd_ablation, f"compare modes {', '.join(MODES)}")):
        p = add(name, func, help_)
        p.add_argument("--corpus", required=True)
        p.add_argument("--valid")
        p.add_argument("--test", required=True)
        p.add_argument("--neighbors")
        p.add_argument("--out", required=True)
        if name == "sweep-rho":
            p.add_argument("--rhos", default="0,0.2,0.4,0.6,0.8")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"softaug: error: {exc}", file=sys.stderr)
        return 2
    except (CorpusFormatError, CheckpointError, ValueError, FloatingPointError, OSError) as exc:
        print(f"softaug: {args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

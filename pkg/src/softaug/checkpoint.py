"""Binary checkpoint container.

Layout (all integers little-endian)::

    b"SEACKPT\\0"             magic
    u32                       format version
    u32 + utf8                kind ("neighbors" | "seq2seq")
    u32                       number of sections
    per section:
        u32 + utf8            name
        u8                    dtype (0 float64, 1 int64, 2 utf8 text)
        u32, u64 * ndim       shape
        u64 + bytes           payload
    u64 + utf8 JSON           manifest trailer

Loading validates every payload length against its declared shape before any
array is built.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import Vocabulary
from .neighbors import NeighborModel
from .seq2seq import Seq2SeqParams, block_shapes
from .training import AdamState

MAGIC = b"SEACKPT\0"
FORMAT_VERSION = 1
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<i8")}
_TEXT = 2


class CheckpointError(ValueError):
    pass


@dataclass
class RunManifest:
    config: dict
    seed: int
    vocab_hash: str
    corpus_paths: dict
    mode: str
    version: str = __version__
    output_dir: str | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self, with_output_dir: bool = True) -> dict:
        out = {
            "config": self.config, "seed": self.seed, "vocab_hash": self.vocab_hash,
            "corpus_paths": self.corpus_paths, "mode": self.mode, "version": self.version,
        }
        if with_output_dir:
            out["output_dir"] = self.output_dir
        if self.extra:
            out["extra"] = self.extra
        return out

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class Checkpoint:
    kind: str
    vocab: Vocabulary
    arrays: dict[str, np.ndarray]
    meta: dict
    manifest: dict


def _put_str(buf, s: str, fmt="<I"):
    b = s.encode("utf-8")
    buf.write(struct.pack(fmt, len(b)))
    buf.write(b)


def _get(fh, fmt):
    size = struct.calcsize(fmt)
    raw = fh.read(size)
    if len(raw) != size:
        raise CheckpointError("truncated checkpoint")
    return struct.unpack(fmt, raw)


def _get_bytes(fh, n):
    raw = fh.read(n)
    if len(raw) != n:
        raise CheckpointError("truncated checkpoint")
    return raw


def _get_str(fh, fmt="<I"):
    (n,) = _get(fh, fmt)
    return _get_bytes(fh, n).decode("utf-8")


def write_checkpoint(path: str | Path, kind: str, vocab: Vocabulary, arrays: dict[str, np.ndarray],
                     meta: dict, manifest: dict) -> None:
    sections: list[tuple[str, int, tuple[int, ...], bytes]] = [
        ("vocab", _TEXT, (), json.dumps(vocab.to_list(), ensure_ascii=False).encode("utf-8")),
        ("meta", _TEXT, (), json.dumps(meta, sort_keys=True).encode("utf-8")),
    ]
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        code = 1 if np.issubdtype(arr.dtype, np.integer) else 0
        sections.append((name, code, arr.shape, np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()))
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    _put_str(buf, kind)
    buf.write(struct.pack("<I", len(sections)))
    for name, code, shape, payload in sections:
        _put_str(buf, name)
        buf.write(struct.pack("<B", code))
        buf.write(struct.pack("<I", len(shape)))
        buf.write(struct.pack(f"<{len(shape)}Q", *shape))
        buf.write(struct.pack("<Q", len(payload)))
        buf.write(payload)
    _put_str(buf, json.dumps(manifest, sort_keys=True), fmt="<Q")
    Path(path).write_bytes(buf.getvalue())


def read_checkpoint(path: str | Path, expected_kind: str | None = None,
                    expected_vocab: Vocabulary | None = None) -> Checkpoint:
    with Path(path).open("rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
        (version,) = _get(fh, "<I")
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        kind = _get_str(fh)
        if expected_kind is not None and kind != expected_kind:
            raise CheckpointError(f"{path}: expected a {expected_kind} checkpoint, found {kind}")
        (n_sections,) = _get(fh, "<I")
        texts, arrays = {}, {}
        for _ in range(n_sections):
            name = _get_str(fh)
            (code,) = _get(fh, "<B")
            (ndim,) = _get(fh, "<I")
            shape = _get(fh, f"<{ndim}Q") if ndim else ()
            (nbytes,) = _get(fh, "<Q")
            if code == _TEXT:
                texts[name] = _get_bytes(fh, nbytes).decode("utf-8")
                continue
            if code not in _DTYPES:
                raise CheckpointError(f"section {name}: unknown dtype code {code}")
            expected = int(np.prod(shape, dtype=np.int64)) * _DTYPES[code].itemsize
            if nbytes != expected:
                raise CheckpointError(f"section {name}: {nbytes} bytes for shape {shape}")
            arrays[name] = np.frombuffer(_get_bytes(fh, nbytes), dtype=_DTYPES[code]).reshape(shape).copy()
        manifest = json.loads(_get_str(fh, fmt="<Q"))
    if "vocab" not in texts or "meta" not in texts:
        raise CheckpointError("checkpoint lacks vocab/meta sections")
    vocab = Vocabulary.from_list(json.loads(texts["vocab"]))
    if manifest.get("vocab_hash") not in (None, vocab.digest()):
        raise CheckpointError("stored vocabulary does not match the manifest hash")
    if expected_vocab is not None and expected_vocab.digest() != vocab.digest():
        raise CheckpointError("checkpoint was trained against a different vocabulary")
    return Checkpoint(kind, vocab, arrays, json.loads(texts["meta"]), manifest)


def save_neighbor_model(model: NeighborModel, path: str | Path, manifest: dict) -> None:
    meta = {"window": model.window, "epochs": model.epochs, "epoch_losses": model.epoch_losses}
    write_checkpoint(path, "neighbors", model.vocab, {"W_in": model.W_in, "W_out": model.W_out}, meta, manifest)


def load_neighbor_model(path: str | Path, vocab: Vocabulary | None = None) -> NeighborModel:
    ck = read_checkpoint(path, "neighbors", vocab)
    try:
        W_in, W_out = ck.arrays["W_in"], ck.arrays["W_out"]
        return NeighborModel(ck.vocab, W_in, W_out, window=int(ck.meta["window"]),
                             epochs=int(ck.meta["epochs"]), epoch_losses=list(ck.meta["epoch_losses"]))
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"invalid neighbor checkpoint: {exc}") from None


def save_seq2seq(params: Seq2SeqParams, vocab: Vocabulary, path: str | Path, manifest: dict,
                 adam: AdamState | None = None, meta: dict | None = None) -> None:
    arrays = dict(params.items())
    if adam is not None:
        arrays.update({f"adam_m/{k}": v for k, v in adam.m.items()})
        arrays.update({f"adam_v/{k}": v for k, v in adam.v.items()})
    meta = {**(meta or {}), "vocab_size": params.vocab_size, "d": params.d, "h": params.h,
            "adam_t": adam.t if adam is not None else None}
    write_checkpoint(path, "seq2seq", vocab, arrays, meta, manifest)


def load_seq2seq(path: str | Path, vocab: Vocabulary | None = None):
    """Returns ``(params, vocab, adam_state_or_None, checkpoint)``."""
    ck = read_checkpoint(path, "seq2seq", vocab)
    V, d, h = ck.meta["vocab_size"], ck.meta["d"], ck.meta["h"]
    if V != len(ck.vocab):
        raise CheckpointError("parameter vocab size differs from stored vocabulary")
    shapes = block_shapes(V, d, h)
    for name, shape in shapes.items():
        if name not in ck.arrays:
            raise CheckpointError(f"missing parameter block {name}")
        if ck.arrays[name].shape != shape:
            raise CheckpointError(f"block {name} has shape {ck.arrays[name].shape}, header says {shape}")
    params = Seq2SeqParams({name: ck.arrays[name] for name in shapes})
    adam = None
    if ck.meta.get("adam_t") is not None:
        adam = AdamState({k: ck.arrays[f"adam_m/{k}"] for k in shapes},
                         {k: ck.arrays[f"adam_v/{k}"] for k in shapes}, int(ck.meta["adam_t"]))
    return params, ck.vocab, adam, ck

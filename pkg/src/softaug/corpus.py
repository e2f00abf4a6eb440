"""Tokenization, vocabulary construction and dialogue corpus I/O.

Corpus files are JSONL, one dialogue per line::

    {"context": ["i have a dog ."], "history": ["hi , how are you ?"], "response": "good , thanks ."}

``context`` holds persona/topic segments (possibly empty), ``history`` the
dialogue turns, ``response`` the reply to be generated.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

PAD, BOS, EOS, SEP, UNK = 0, 1, 2, 3, 4
RESERVED_TOKENS = ("<pad>", "<bos>", "<eos>", "<sep>", "<unk>")

# words may carry internal apostrophes ("don't"); any other non-space char is its own token
_TOKEN_RE = re.compile(r"\w+(?:'\w+)*|[^\w\s]")


class CorpusFormatError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it into word and punctuation tokens.

    >>> tokenize("I don't know.")
    ['i', "don't", 'know', '.']
    """
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Frozen token <-> id mapping with the five reserved ids at 0..4."""

    def __init__(self, tokens: Sequence[str]):
        self._itos = list(RESERVED_TOKENS)
        for tok in tokens:
            if tok in RESERVED_TOKENS:
                raise ValueError(f"reserved token {tok!r} in vocabulary list")
            self._itos.append(tok)
        self._stoi = {tok: i for i, tok in enumerate(self._itos)}
        if len(self._stoi) != len(self._itos):
            raise ValueError("duplicate tokens in vocabulary list")

    def __len__(self) -> int:
        return len(self._itos)

    def __contains__(self, token: str) -> bool:
        return token in self._stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._itos == other._itos

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)})"

    @property
    def tokens(self) -> list[str]:
        return list(self._itos)

    def id(self, token: str) -> int:
        return self._stoi.get(token, UNK)

    def token(self, idx: int) -> str:
        return self._itos[idx]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self._stoi.get(t, UNK) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self._itos[i] for i in ids]

    def is_reserved(self, idx: int) -> bool:
        return 0 <= idx < len(RESERVED_TOKENS)

    def digest(self) -> str:
        """sha256 over the id-ordered token list; identifies checkpoints' vocabularies."""
        return hashlib.sha256("\n".join(self._itos).encode("utf-8")).hexdigest()

    def to_list(self) -> list[str]:
        return self._itos[len(RESERVED_TOKENS):]

    @classmethod
    def from_list(cls, tokens: Sequence[str]) -> "Vocabulary":
        return cls(tokens)


@dataclass(frozen=True)
class Dialogue:
    """One corpus line, already tokenized but not yet mapped to ids."""

    context: tuple[tuple[str, ...], ...]
    history: tuple[tuple[str, ...], ...]
    response: tuple[str, ...]

    @classmethod
    def from_text(cls, context: Sequence[str], history: Sequence[str], response: str) -> "Dialogue":
        return cls(
            tuple(tuple(tokenize(s)) for s in context),
            tuple(tuple(tokenize(s)) for s in history),
            tuple(tokenize(response)),
        )

    def sentences(self) -> list[tuple[str, ...]]:
        return [s for s in (*self.context, *self.history, self.response) if s]


@dataclass(frozen=True)
class DialogueSample:
    """History ids (context and turns joined by SEP) and EOS-terminated response ids."""

    history: tuple[int, ...]
    response: tuple[int, ...]

    def __post_init__(self):
        if not self.history or not self.response:
            raise ValueError("history and response must be non-empty")
        if PAD in self.history or PAD in self.response:
            raise ValueError("PAD id inside a sample")


@dataclass
class CorpusSplit:
    dialogues: list[Dialogue]
    tag: str = "train"
    path: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.tag == "train" and not self.dialogues:
            raise ValueError("train split is empty")

    def __len__(self) -> int:
        return len(self.dialogues)

    def __iter__(self):
        return iter(self.dialogues)

    def sentences(self) -> list[tuple[str, ...]]:
        return [s for d in self.dialogues for s in d.sentences()]

    def encode(self, vocab: Vocabulary) -> list[DialogueSample]:
        samples = []
        for d in self.dialogues:
            history = assemble_history(
                [vocab.encode(s) for s in d.context], [vocab.encode(s) for s in d.history]
            )
            if not history:
                # a dialogue whose turns are all empty strings still needs one input position
                history = [UNK]
            samples.append(DialogueSample(tuple(history), tuple(vocab.encode(d.response)) + (EOS,)))
        return samples

    def references(self) -> list[list[str]]:
        return [list(d.response) for d in self.dialogues]


def build_vocab(split: CorpusSplit | Iterable[Dialogue], min_count: int = 1) -> Vocabulary:
    """Vocabulary of every token seen at least ``min_count`` times.

    Ids after the reserved block are ordered by (frequency desc, token asc).
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    n_dialogues = 0
    for d in split:
        n_dialogues += 1
        for s in d.sentences():
            counts.update(t for t in s if t not in RESERVED_TOKENS)
    if n_dialogues == 0 or not counts:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocabulary(kept)


def assemble_history(context_segments: Sequence[Sequence[int]], turns: Sequence[Sequence[int]]) -> list[int]:
    """Concatenate context segments then turns, with one SEP between adjacent parts."""
    out: list[int] = []
    for part in (*context_segments, *turns):
        if out:
            out.append(SEP)
        out.extend(part)
    return out


def _parse_line(obj, lineno: int) -> Dialogue:
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"line {lineno}: expected a JSON object")
    for key in ("history", "response"):
        if key not in obj:
            raise CorpusFormatError(f"line {lineno}: missing field {key!r}")
    context = obj.get("context", [])
    history = obj["history"]
    response = obj["response"]
    if not isinstance(context, list) or not all(isinstance(s, str) for s in context):
        raise CorpusFormatError(f"line {lineno}: 'context' must be a list of strings")
    if not isinstance(history, list) or not all(isinstance(s, str) for s in history) or not history:
        raise CorpusFormatError(f"line {lineno}: 'history' must be a non-empty list of strings")
    if not isinstance(response, str):
        raise CorpusFormatError(f"line {lineno}: 'response' must be a string")
    return Dialogue.from_text(context, history, response)


def load_corpus(path: str | Path, tag: str = "train") -> CorpusSplit:
    path = Path(path)
    dialogues = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            dialogues.append(_parse_line(obj, lineno))
    return CorpusSplit(dialogues, tag=tag, path=str(path))


def save_corpus(path: str | Path, split: CorpusSplit | Iterable[Dialogue]) -> None:
    """Write dialogues as JSONL with each token sequence space-joined."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in split:
            obj = {
                "context": [" ".join(s) for s in d.context],
                "history": [" ".join(s) for s in d.history],
                "response": " ".join(d.response),
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def save_generated(path: str | Path, responses: Iterable[Sequence[str] | str]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in responses:
            text = r if isinstance(r, str) else " ".join(r)
            if "\n" in text:
                raise ValueError("generated response contains a newline")
            fh.write(text + "\n")


def load_generated(path: str | Path) -> list[list[str]]:
    with Path(path).open(encoding="utf-8") as fh:
        return [line.rstrip("\n").split() for line in fh]

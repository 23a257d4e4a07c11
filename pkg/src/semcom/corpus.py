"""Text ingestion: tokenization, length filtering, vocabulary and padded batches."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD, START, END, UNK = "<pad>", "<start>", "<end>", "<unk>"
RESERVED = (PAD, START, END, UNK)

_TOKEN_RE = re.compile(r"\w+(?:'\w+)*|[^\w\s]")


class DataError(ValueError):
    """Input data is empty, malformed or out of range."""


def tokenize(text: str) -> list[str]:
    """Lowercase, split punctuation into standalone tokens, split on whitespace."""
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


def normalize(text: str) -> str:
    """Canonical form that ``detokenize(tokenize(text))`` reproduces."""
    return detokenize(tokenize(text))


class Vocabulary:
    """Bijective token/id map with reserved ids PAD=0, START=1, END=2, UNK=3."""

    def __init__(self, tokens: Iterable[str]):
        self.itos: list[str] = list(RESERVED)
        for tok in tokens:
            if tok not in RESERVED:
                self.itos.append(tok)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise DataError("vocabulary tokens must be unique")
        if len(self.itos) < 5:
            raise DataError("vocabulary needs at least one non-reserved token")

    pad_id = 0
    start_id = 1
    end_id = 2
    unk_id = 3

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]], max_size: int = 22_000) -> "Vocabulary":
        """Most frequent tokens first (ties by token text), truncated to ``max_size`` ids."""
        counts = Counter(tok for sent in sentences for tok in sent)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        keep = max(max_size - len(RESERVED), 1)
        return cls(tok for tok, _ in ranked[:keep])

    def __len__(self) -> int:
        return len(self.itos)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(t, self.unk_id) for t in tokens]

    def decode(self, ids: Iterable[int], strip: bool = True) -> list[str]:
        """Map ids back to tokens; with ``strip``, stop at END and drop PAD/START."""
        out = []
        for i in ids:
            i = int(i)
            if strip:
                if i == self.end_id:
                    break
                if i in (self.pad_id, self.start_id):
                    continue
            out.append(self.itos[i])
        return out

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, tok in enumerate(self.itos):
                fh.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, _, idx = line.rpartition("\t")
                if not tok or not idx.isdigit():
                    raise DataError(f"{path}:{lineno}: expected 'token<TAB>id'")
                entries.append((int(idx), tok))
        entries.sort()
        if [i for i, _ in entries] != list(range(len(entries))):
            raise DataError(f"{path}: ids are not contiguous from 0")
        tokens = [t for _, t in entries]
        if tuple(tokens[:4]) != RESERVED:
            raise DataError(f"{path}: reserved tokens missing or misplaced")
        return cls(tokens[4:])


@dataclass(frozen=True)
class TokenBatch:
    """Padded id matrix; ``pad_mask`` is true at real (non-PAD) positions."""

    ids: np.ndarray
    lengths: np.ndarray
    pad_mask: np.ndarray

    @property
    def size(self) -> int:
        return self.ids.shape[0]

    @property
    def max_len(self) -> int:
        return self.ids.shape[1]


def read_lines(path) -> list[str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read corpus {path}: {exc.strerror}") from exc
    return [line.strip() for line in text.splitlines() if line.strip()]


def filter_and_split(sentences: Sequence[str], min_len: int = 4, max_len: int = 36,
                     split_ratio: float = 0.9, seed: int = 0):
    """Keep sentences with ``min_len <= #tokens <= max_len`` and split them.

    Returns ``(train, test)`` as lists of token lists.  The split is a seeded
    permutation, so it is deterministic for a given seed.
    """
    if not 1 <= min_len <= max_len:
        raise ValueError(f"need 1 <= min_len <= max_len, got {min_len}, {max_len}")
    if not 0.0 < split_ratio <= 1.0:
        raise ValueError(f"split_ratio must be in (0, 1], got {split_ratio}")
    kept = [toks for toks in map(tokenize, sentences) if min_len <= len(toks) <= max_len]
    if not kept:
        raise DataError(f"no sentences with {min_len}-{max_len} tokens")
    order = np.random.default_rng(seed).permutation(len(kept))
    n_train = int(round(split_ratio * len(kept)))
    train = [kept[i] for i in order[:n_train]]
    test = [kept[i] for i in order[n_train:]]
    return train, test


def make_batch(sentences: Sequence[Sequence[str]], vocab: Vocabulary) -> TokenBatch:
    """Frame each sentence as START ... END and pad to the longest one."""
    rows = [[vocab.start_id] + vocab.encode(s) + [vocab.end_id] for s in sentences]
    lengths = np.array([len(r) for r in rows], dtype=np.int64)
    ids = np.full((len(rows), int(lengths.max())), vocab.pad_id, dtype=np.int64)
    for i, r in enumerate(rows):
        ids[i, :len(r)] = r
    return TokenBatch(ids, lengths, ids != vocab.pad_id)


def batch(sentences: Sequence[Sequence[str]], vocab: Vocabulary, batch_size: int) -> list[TokenBatch]:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    return [make_batch(sentences[i:i + batch_size], vocab)
            for i in range(0, len(sentences), batch_size)]

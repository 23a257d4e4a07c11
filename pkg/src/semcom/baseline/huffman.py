"""Word-level Huffman coding with a character-level escape for unseen words."""

from __future__ import annotations

import heapq
import itertools
import math
from collections import Counter
from typing import Iterable, Mapping, Sequence

import numpy as np

ESCAPE = "<esc>"
END_OF_WORD = "\x00"
_CHAR_SECTION = "#chars"


class EncodingError(ValueError):
    """A symbol has no codeword and cannot be escaped."""


def huffman_code(freqs: Mapping[str, float]) -> dict[str, str]:
    """Optimal prefix-free code for ``freqs``; ties broken by symbol order for determinism."""
    if not freqs:
        raise ValueError("cannot build a code for an empty alphabet")
    if len(freqs) == 1:
        return {next(iter(freqs)): "0"}
    counter = itertools.count()
    heap = [(w, next(counter), sym) for sym, w in sorted(freqs.items())]
    heapq.heapify(heap)
    children = {}
    while len(heap) > 1:
        w0, _, n0 = heapq.heappop(heap)
        w1, _, n1 = heapq.heappop(heap)
        node = ("node", next(counter))
        children[node] = (n0, n1)
        heapq.heappush(heap, (w0 + w1, node[1], node))
    codes = {}
    stack = [(heap[0][2], "")]
    while stack:
        node, prefix = stack.pop()
        if node in children:
            left, right = children[node]
            stack.append((left, prefix + "0"))
            stack.append((right, prefix + "1"))
        else:
            codes[node] = prefix
    return codes


class _Tree:
    """Binary decoding trie: ``child[node][bit]`` and ``symbol[node]`` at leaves."""

    def __init__(self, codes: Mapping[str, str]):
        self.child = [[-1, -1]]
        self.symbol: list[str | None] = [None]
        for sym, word in codes.items():
            node = 0
            for bit in word:
                b = int(bit)
                if self.child[node][b] < 0:
                    self.child[node][b] = len(self.child)
                    self.child.append([-1, -1])
                    self.symbol.append(None)
                node = self.child[node][b]
            self.symbol[node] = sym


def _bits(word: str) -> np.ndarray:
    return np.frombuffer(word.encode("ascii"), dtype=np.uint8) - ord("0")


class HuffmanCodebook:
    """Word codebook plus character codebook used after the escape codeword."""

    def __init__(self, words: Mapping[str, str], chars: Mapping[str, str] | None = None):
        self.words = dict(words)
        self.chars = dict(chars or {})
        self._word_bits = {k: _bits(v) for k, v in self.words.items()}
        self._char_bits = {k: _bits(v) for k, v in self.chars.items()}
        self._word_tree = _Tree(self.words)
        self._char_tree = _Tree(self.chars) if self.chars else None

    @classmethod
    def from_frequencies(cls, freqs: Mapping[str, float]) -> "HuffmanCodebook":
        return cls(huffman_code(freqs))

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]], escape: bool = True) -> "HuffmanCodebook":
        """Codebook from token frequencies of a training corpus.

        With ``escape``, an escape symbol (weighted like a singleton word) and
        a character code over every character seen are added.
        """
        counts = Counter(tok for sent in sentences for tok in sent)
        if not escape:
            return cls(huffman_code(counts))
        counts[ESCAPE] = 1
        char_counts = Counter()
        for tok, n in counts.items():
            if tok != ESCAPE:
                for c in tok:
                    char_counts[c] += n
                char_counts[END_OF_WORD] += n
        return cls(huffman_code(counts), huffman_code(char_counts))

    @property
    def has_escape(self) -> bool:
        return ESCAPE in self.words and bool(self.chars)

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        """Concatenated codewords as a uint8 bit array."""
        parts = []
        for tok in tokens:
            bits = self._word_bits.get(tok)
            if bits is not None:
                parts.append(bits)
                continue
            if not self.has_escape:
                raise EncodingError(f"token {tok!r} has no codeword and no escape path")
            parts.append(self._word_bits[ESCAPE])
            for c in tok:
                cb = self._char_bits.get(c)
                if cb is None:
                    raise EncodingError(f"character {c!r} of {tok!r} has no codeword")
                parts.append(cb)
            parts.append(self._char_bits[END_OF_WORD])
        return np.concatenate(parts).astype(np.uint8) if parts else np.zeros(0, dtype=np.uint8)

    def decode(self, bits: Iterable[int], max_tokens: int | None = None) -> list[str]:
        """Greedy prefix decoding; an incomplete trailing codeword is dropped."""
        words, chars = self._word_tree, self._char_tree
        out: list[str] = []
        node, spelling = 0, None
        for bit in bits:
            tree = words if spelling is None else chars
            node = tree.child[node][int(bit)]
            if node < 0:  # only possible for a non-full tree
                node = 0
                continue
            sym = tree.symbol[node]
            if sym is None:
                continue
            node = 0
            if spelling is None:
                if sym == ESCAPE and chars is not None:
                    spelling = []
                else:
                    out.append(sym)
            elif sym == END_OF_WORD:
                out.append("".join(spelling))
                spelling = None
            else:
                spelling.append(sym)
            if max_tokens is not None and len(out) >= max_tokens:
                break
        return out

    def mean_length(self, freqs: Mapping[str, float]) -> float:
        total = sum(freqs.values())
        return sum(f * len(self.words[s]) for s, f in freqs.items()) / total

    def is_prefix_free(self) -> bool:
        for table in (self.words, self.chars):
            codes = sorted(table.values())
            # in sorted order a prefix sorts immediately before some word it prefixes
            if any(b.startswith(a) for a, b in zip(codes, codes[1:])):
                return False
        return True

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok, word in self.words.items():
                fh.write(f"{tok}\t{word}\n")
            if self.chars:
                fh.write(f"{_CHAR_SECTION}\n")
                for c, word in self.chars.items():
                    fh.write(f"{c.encode('unicode_escape').decode('ascii')}\t{word}\n")

    @classmethod
    def load(cls, path) -> "HuffmanCodebook":
        words, chars, target = {}, {}, None
        target = words
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line == _CHAR_SECTION:
                    target = chars
                    continue
                sym, _, word = line.rpartition("\t")
                if target is chars:
                    sym = sym.encode("ascii").decode("unicode_escape")
                target[sym] = word
        return cls(words, chars)


def entropy(freqs: Mapping[str, float]) -> float:
    """Shannon entropy in bits of the normalized frequency table."""
    total = sum(freqs.values())
    return -sum((f / total) * math.log2(f / total) for f in freqs.values() if f > 0)
